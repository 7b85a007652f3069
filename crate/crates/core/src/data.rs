//! Triple datasets, vocabularies, the filtered-setting index and
//! entailment constraint files.
//!
//! All text formats are tab-separated UTF-8 with one record per line.
//! Names are opaque: no trimming, case folding or unicode normalization is
//! applied, so `"a"` and `"a "` are two different entities.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{KgError, NameKind, Result};

/// Suffix marking an inverted premise in entailment files.
pub const INVERSE_SUFFIX: &str = "^-1";

/// Dense, insertion-ordered name table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NameTable {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl NameTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut table = Self::new();
        for name in names {
            let name = name.into();
            if table.ids.contains_key(&name) {
                return Err(KgError::argument(format!("duplicate name `{name}`")));
            }
            table.intern(&name);
        }
        Ok(table)
    }

    /// Returns the id of `name`, assigning the next free id if unseen.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Entity and relation name tables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    pub entities: NameTable,
    pub relations: NameTable,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_id(&self, name: &str) -> Result<usize> {
        self.entities.id(name).ok_or_else(|| KgError::UnknownName {
            kind: NameKind::Entity,
            name: name.to_owned(),
        })
    }

    pub fn relation_id(&self, name: &str) -> Result<usize> {
        self.relations.id(name).ok_or_else(|| KgError::UnknownName {
            kind: NameKind::Relation,
            name: name.to_owned(),
        })
    }

    pub fn entity_name(&self, id: usize) -> &str {
        self.entities.name(id).unwrap_or("?")
    }

    pub fn relation_name(&self, id: usize) -> &str {
        self.relations.name(id).unwrap_or("?")
    }

    /// Writes the two vocab dumps (one name per line, line number = id).
    pub fn save(&self, entities: &Path, relations: &Path) -> Result<()> {
        write_names(entities, self.entities.names())?;
        write_names(relations, self.relations.names())
    }

    pub fn load(entities: &Path, relations: &Path) -> Result<Self> {
        Ok(Vocab {
            entities: read_names(entities)?,
            relations: read_names(relations)?,
        })
    }
}

fn write_names(path: &Path, names: &[String]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| KgError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for name in names {
        writeln!(out, "{name}").map_err(|e| KgError::io(path, e))?;
    }
    out.flush().map_err(|e| KgError::io(path, e))
}

fn read_names(path: &Path) -> Result<NameTable> {
    let text = fs::read_to_string(path).map_err(|e| KgError::io(path, e))?;
    NameTable::from_names(lines(&text).map(|(_, l)| l)).map_err(|e| KgError::Parse {
        path: path.to_owned(),
        line: 0,
        message: e.to_string(),
    })
}

/// Iterates `(1-based line number, line)` pairs, dropping only the `\n`
/// terminator so names keep every other byte.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split_terminator('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l))
}

/// An integer-coded fact `(head, rel, tail)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub rel: usize,
    pub tail: usize,
}

impl Triple {
    pub const fn new(head: usize, rel: usize, tail: usize) -> Self {
        Triple { head, rel, tail }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.rel, self.tail)
    }
}

impl From<(usize, usize, usize)> for Triple {
    fn from((head, rel, tail): (usize, usize, usize)) -> Self {
        Triple { head, rel, tail }
    }
}

/// Reads a triple TSV file. With `grow`, unseen names get fresh ids;
/// otherwise they are rejected.
pub fn load_triples(path: &Path, vocab: &mut Vocab, grow: bool) -> Result<Vec<Triple>> {
    let file = fs::File::open(path).map_err(|e| KgError::io(path, e))?;
    parse_triples(BufReader::new(file), path, vocab, grow)
}

/// Like [`load_triples`], over any reader. `origin` only labels errors.
pub fn parse_triples<R: Read>(
    reader: R,
    origin: &Path,
    vocab: &mut Vocab,
    grow: bool,
) -> Result<Vec<Triple>> {
    let mut text = String::new();
    BufReader::new(reader)
        .read_to_string(&mut text)
        .map_err(|e| KgError::io(origin, e))?;

    let mut triples = Vec::new();
    for (lineno, line) in lines(&text) {
        let fields: Vec<&str> = line.split('\t').collect();
        let [h, r, t] = fields[..] else {
            return Err(KgError::Parse {
                path: origin.to_owned(),
                line: lineno,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        };
        let triple = if grow {
            Triple::new(
                vocab.entities.intern(h),
                vocab.relations.intern(r),
                vocab.entities.intern(t),
            )
        } else {
            Triple::new(
                vocab.entity_id(h)?,
                vocab.relation_id(r)?,
                vocab.entity_id(t)?,
            )
        };
        triples.push(triple);
    }
    Ok(triples)
}

pub fn write_triples(path: &Path, triples: &[Triple], vocab: &Vocab) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| KgError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for t in triples {
        writeln!(
            out,
            "{}\t{}\t{}",
            vocab.entity_name(t.head),
            vocab.relation_name(t.rel),
            vocab.entity_name(t.tail)
        )
        .map_err(|e| KgError::io(path, e))?;
    }
    out.flush().map_err(|e| KgError::io(path, e))
}

/// Train/valid/test splits sharing one vocabulary.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    pub vocab: Vocab,
}

/// File names looked up inside a dataset directory.
pub const SPLIT_FILES: [&str; 3] = ["train.txt", "valid.txt", "test.txt"];

impl Dataset {
    /// Loads `train.txt`, `valid.txt` and `test.txt` from `dir`, building
    /// the vocabulary from train first. Names first seen in valid/test are
    /// admitted with a warning since their embeddings never get trained.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut vocab = Vocab::new();
        let train = load_triples(&dir.join(SPLIT_FILES[0]), &mut vocab, true)?;
        let (n_train, m_train) = (vocab.n_entities(), vocab.n_relations());
        let valid = load_optional(&dir.join(SPLIT_FILES[1]), &mut vocab, true)?;
        let test = load_optional(&dir.join(SPLIT_FILES[2]), &mut vocab, true)?;
        let new_entities = vocab.n_entities() - n_train;
        let new_relations = vocab.n_relations() - m_train;
        if new_entities > 0 || new_relations > 0 {
            warn!(
                "{}: {new_entities} entities and {new_relations} relations appear only outside train",
                dir.display()
            );
        }
        let dataset = Dataset {
            train,
            valid,
            test,
            vocab,
        };
        dataset.warn_on_overlap(dir);
        Ok(dataset)
    }

    /// Loads the splits against a fixed vocabulary (e.g. one stored next to
    /// a checkpoint). Unknown names are errors.
    pub fn load_dir_with_vocab(dir: &Path, mut vocab: Vocab) -> Result<Self> {
        let train = load_triples(&dir.join(SPLIT_FILES[0]), &mut vocab, false)?;
        let valid = load_optional(&dir.join(SPLIT_FILES[1]), &mut vocab, false)?;
        let test = load_optional(&dir.join(SPLIT_FILES[2]), &mut vocab, false)?;
        Ok(Dataset {
            train,
            valid,
            test,
            vocab,
        })
    }

    pub fn split_paths(dir: &Path) -> [PathBuf; 3] {
        SPLIT_FILES.map(|f| dir.join(f))
    }

    /// Number of triples shared between two or more splits.
    pub fn overlap_count(&self) -> usize {
        let train: HashSet<_> = self.train.iter().collect();
        let valid: HashSet<_> = self.valid.iter().collect();
        let test: HashSet<_> = self.test.iter().collect();
        valid.iter().filter(|t| train.contains(*t)).count()
            + test
                .iter()
                .filter(|t| train.contains(*t) || valid.contains(*t))
                .count()
    }

    fn warn_on_overlap(&self, dir: &Path) {
        let overlap = self.overlap_count();
        if overlap > 0 {
            warn!("{}: {overlap} triples occur in more than one split", dir.display());
        }
    }
}

fn load_optional(path: &Path, vocab: &mut Vocab, grow: bool) -> Result<Vec<Triple>> {
    if path.exists() {
        load_triples(path, vocab, grow)
    } else {
        warn!("{} not found, using an empty split", path.display());
        Ok(Vec::new())
    }
}

/// Set of all known true triples (train ∪ valid ∪ test), used to filter
/// corrupted candidates at evaluation time.
#[derive(Debug, Clone, Default)]
pub struct KnownIndex {
    triples: HashSet<Triple>,
    heads: HashMap<(usize, usize), Vec<usize>>,
    tails: HashMap<(usize, usize), Vec<usize>>,
}

impl KnownIndex {
    pub fn from_triples<'a, I>(triples: I) -> Self
    where
        I: IntoIterator<Item = &'a Triple>,
    {
        let mut index = KnownIndex::default();
        for &t in triples {
            if index.triples.insert(t) {
                index.heads.entry((t.rel, t.tail)).or_default().push(t.head);
                index.tails.entry((t.head, t.rel)).or_default().push(t.tail);
            }
        }
        for list in index.heads.values_mut().chain(index.tails.values_mut()) {
            list.sort_unstable();
        }
        index
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    /// Known heads `h` with `(h, rel, tail)` true, sorted.
    pub fn heads(&self, rel: usize, tail: usize) -> &[usize] {
        self.heads.get(&(rel, tail)).map_or(&[], Vec::as_slice)
    }

    /// Known tails `t` with `(head, rel, t)` true, sorted.
    pub fn tails(&self, head: usize, rel: usize) -> &[usize] {
        self.tails.get(&(head, rel)).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

pub fn build_known_index(dataset: &Dataset) -> KnownIndex {
    KnownIndex::from_triples(
        dataset
            .train
            .iter()
            .chain(&dataset.valid)
            .chain(&dataset.test),
    )
}

/// Weighted rule `premise →λ conclusion`, where the premise may be the
/// inverse relation (`r⁻¹(x, y) ≜ r(y, x)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entailment {
    pub premise: usize,
    pub premise_inverted: bool,
    pub conclusion: usize,
    pub lambda: f64,
}

impl Entailment {
    pub fn new(premise: usize, premise_inverted: bool, conclusion: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(KgError::Range {
                what: "lambda",
                value: lambda,
                range: "(0, 1]",
            });
        }
        if premise == conclusion && !premise_inverted {
            return Err(KgError::argument(format!(
                "entailment premise and conclusion are the same relation {premise}"
            )));
        }
        Ok(Entailment {
            premise,
            premise_inverted,
            conclusion,
            lambda,
        })
    }

    pub fn format(&self, vocab: &Vocab) -> String {
        format!(
            "{}{}\t{}\t{:.6}",
            vocab.relation_name(self.premise),
            if self.premise_inverted { INVERSE_SUFFIX } else { "" },
            vocab.relation_name(self.conclusion),
            self.lambda
        )
    }
}

pub fn load_entailments(path: &Path, vocab: &Vocab) -> Result<Vec<Entailment>> {
    let text = fs::read_to_string(path).map_err(|e| KgError::io(path, e))?;
    parse_entailments(&text, path, vocab)
}

pub fn parse_entailments(text: &str, origin: &Path, vocab: &Vocab) -> Result<Vec<Entailment>> {
    let parse_err = |line: usize, message: String| KgError::Parse {
        path: origin.to_owned(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (lineno, line) in lines(text) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [premise, conclusion, lambda] = fields[..] else {
            return Err(parse_err(
                lineno,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        };
        let (premise, inverted) = match premise.strip_suffix(INVERSE_SUFFIX) {
            Some(base) if vocab.relations.id(premise).is_none() => (base, true),
            _ => (premise, false),
        };
        let lambda: f64 = lambda
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad confidence `{lambda}`")))?;
        out.push(Entailment::new(
            vocab.relation_id(premise)?,
            inverted,
            vocab.relation_id(conclusion)?,
            lambda,
        )?);
    }
    Ok(out)
}

pub fn write_entailments(path: &Path, ents: &[Entailment], vocab: &Vocab) -> Result<()> {
    let mut text = String::new();
    for e in ents {
        text.push_str(&e.format(vocab));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| KgError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, vocab: &mut Vocab, grow: bool) -> Result<Vec<Triple>> {
        parse_triples(text.as_bytes(), Path::new("mem"), vocab, grow)
    }

    #[test]
    fn first_seen_ordering() {
        let mut vocab = Vocab::new();
        let triples = parse("a\tp\tb\n", &mut vocab, true).unwrap();
        assert_eq!(triples, vec![Triple::new(0, 0, 1)]);
        assert_eq!(vocab.entity_id("a").unwrap(), 0);
        assert_eq!(vocab.entity_id("b").unwrap(), 1);
        assert_eq!(vocab.relation_id("p").unwrap(), 0);
    }

    #[test]
    fn empty_file_leaves_vocab_alone() {
        let mut vocab = Vocab::new();
        vocab.entities.intern("x");
        let before = vocab.clone();
        assert!(parse("", &mut vocab, true).unwrap().is_empty());
        assert_eq!(vocab, before);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse("a\tp\n", &mut Vocab::new(), true).unwrap_err();
        assert!(matches!(err, KgError::Parse { line: 1, .. }), "{err}");
        let err = parse("a\tp\tb\nc\tq\td\te\n", &mut Vocab::new(), true).unwrap_err();
        assert!(matches!(err, KgError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn frozen_vocab_rejects_unseen_names() {
        let mut vocab = Vocab::new();
        parse("a\tp\tb\n", &mut vocab, true).unwrap();
        let err = parse("a\tp\tzz\n", &mut vocab, false).unwrap_err();
        match err {
            KgError::UnknownName { kind, name } => {
                assert_eq!(kind, NameKind::Entity);
                assert_eq!(name, "zz");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn names_are_not_normalized() {
        let mut vocab = Vocab::new();
        parse("a\tp\ta \nA\tp\ta\n", &mut vocab, true).unwrap();
        assert_eq!(vocab.n_entities(), 3);
    }

    #[test]
    fn known_index_set_semantics() {
        let dataset = Dataset {
            train: vec![Triple::new(0, 0, 1)],
            valid: vec![],
            test: vec![Triple::new(2, 0, 1)],
            vocab: Vocab::new(),
        };
        let index = build_known_index(&dataset);
        assert!(index.contains(&Triple::new(0, 0, 1)));
        assert!(index.contains(&Triple::new(2, 0, 1)));
        assert!(!index.contains(&Triple::new(1, 0, 0)));
        assert_eq!(index.heads(0, 1), &[0, 2]);
        assert_eq!(index.tails(0, 0), &[1]);
        assert!(index.tails(1, 0).is_empty());
    }

    #[test]
    fn known_index_dedups() {
        let t = Triple::new(0, 0, 1);
        let index = KnownIndex::from_triples(&[t, t, t]);
        assert_eq!(index.len(), 1);
        assert_eq!(index.heads(0, 1), &[0]);
        assert!(build_known_index(&Dataset::default()).is_empty());
    }

    fn rel_vocab(names: &[&str]) -> Vocab {
        let mut vocab = Vocab::new();
        for n in names {
            vocab.relations.intern(n);
        }
        vocab
    }

    #[test]
    fn entailment_lines() {
        let vocab = rel_vocab(&["hypernym", "hyponym", "owner", "owning_company"]);
        let ents = parse_entailments(
            "hypernym^-1\thyponym\t1.00\nowner\towning_company\t0.95\n",
            Path::new("mem"),
            &vocab,
        )
        .unwrap();
        assert_eq!(ents[0], Entailment::new(0, true, 1, 1.0).unwrap());
        assert_eq!(ents[1], Entailment::new(2, false, 3, 0.95).unwrap());
    }

    #[test]
    fn entailment_range_and_vocab_errors() {
        let vocab = rel_vocab(&["p", "q"]);
        let err = parse_entailments("p\tq\t1.5\n", Path::new("mem"), &vocab).unwrap_err();
        assert!(matches!(err, KgError::Range { .. }), "{err}");
        let err = parse_entailments("p\tq\t0\n", Path::new("mem"), &vocab).unwrap_err();
        assert!(matches!(err, KgError::Range { .. }), "{err}");
        let err = parse_entailments("p\tnope\t0.9\n", Path::new("mem"), &vocab).unwrap_err();
        assert!(matches!(err, KgError::UnknownName { .. }), "{err}");
        let err = parse_entailments("p\tp\t0.9\n", Path::new("mem"), &vocab).unwrap_err();
        assert!(matches!(err, KgError::Argument(_)), "{err}");
        // r⁻¹ → r is a legitimate symmetry rule
        assert!(parse_entailments("p^-1\tp\t0.9\n", Path::new("mem"), &vocab).is_ok());
    }

    #[test]
    fn relation_literally_named_with_suffix() {
        let vocab = rel_vocab(&["odd^-1", "q"]);
        let ents = parse_entailments("odd^-1\tq\t0.9\n", Path::new("mem"), &vocab).unwrap();
        assert!(!ents[0].premise_inverted);
    }

    #[test]
    fn vocab_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut vocab = Vocab::new();
        parse("a\tp\tb\nc\tq\ta\n", &mut vocab, true).unwrap();
        let (e, r) = (dir.path().join("e.txt"), dir.path().join("r.txt"));
        vocab.save(&e, &r).unwrap();
        assert_eq!(Vocab::load(&e, &r).unwrap(), vocab);
    }
}
