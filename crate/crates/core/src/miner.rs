//! Length-1 rule mining with PCA confidence.
//!
//! A rule `p → q` reads "every `(x, y)` with `p(x, y)` also has `q(x, y)`".
//! Premises range over every relation and its inverse; conclusions are
//! never inverted (an inverted conclusion is the inverted-premise rule in
//! the other direction). Under the partial completeness assumption a premise
//! pair `(x, y)` only counts as a counter-example when `x` has at least one
//! `q` fact:
//!
//! ```text
//! support  = |{(x, y) : p(x, y) ∧ q(x, y)}|
//! pca_body = |{(x, y) : p(x, y) ∧ ∃y′ q(x, y′)}|
//! conf     = support / pca_body
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use crate::data::{Entailment, Triple, Vocab, INVERSE_SUFFIX};
use crate::error::Result;

pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.8;
pub const DEFAULT_MIN_SUPPORT: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct MinedRule {
    pub entailment: Entailment,
    pub support: usize,
    pub pca_body: usize,
    pub pca_confidence: f64,
}

/// Support and PCA body counts for every `(signed premise, conclusion)`
/// combination with a non-empty PCA body. Keys are
/// `(premise, premise_inverted, conclusion)`.
pub fn rule_counts(train: &[Triple]) -> BTreeMap<(usize, bool, usize), (usize, usize)> {
    let facts: BTreeSet<Triple> = train.iter().copied().collect();

    let mut pair_rels: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut subject_rels: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    let mut rel_pairs: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for t in &facts {
        pair_rels.entry((t.head, t.tail)).or_default().push(t.rel);
        subject_rels.entry(t.head).or_default().insert(t.rel);
        rel_pairs.entry(t.rel).or_default().push((t.head, t.tail));
    }

    let mut counts: BTreeMap<(usize, bool, usize), (usize, usize)> = BTreeMap::new();
    for (&rel, pairs) in &rel_pairs {
        for inverted in [false, true] {
            for &(h, t) in pairs {
                let (x, y) = if inverted { (t, h) } else { (h, t) };
                let Some(subject) = subject_rels.get(&x) else {
                    continue;
                };
                for &q in subject {
                    if q == rel && !inverted {
                        continue;
                    }
                    counts.entry((rel, inverted, q)).or_default().1 += 1;
                }
                for &q in pair_rels.get(&(x, y)).map_or(&[][..], Vec::as_slice) {
                    if q == rel && !inverted {
                        continue;
                    }
                    counts.entry((rel, inverted, q)).or_default().0 += 1;
                }
            }
        }
    }
    counts
}

/// Rules with `pca_confidence > min_conf` and `support ≥ min_support`,
/// sorted by (premise, inverted, conclusion). Duplicate triples are ignored.
pub fn mine_entailments(train: &[Triple], min_conf: f64, min_support: usize) -> Result<Vec<MinedRule>> {
    if !(min_conf > 0.0 && min_conf <= 1.0) {
        return Err(crate::error::KgError::Range {
            what: "min_conf",
            value: min_conf,
            range: "(0, 1]",
        });
    }
    let mut rules = Vec::new();
    for ((premise, inverted, conclusion), (support, pca_body)) in rule_counts(train) {
        if pca_body == 0 || support < min_support.max(1) {
            continue;
        }
        let conf = support as f64 / pca_body as f64;
        if conf > min_conf {
            rules.push(MinedRule {
                entailment: Entailment::new(premise, inverted, conclusion, conf)?,
                support,
                pca_body,
                pca_confidence: conf,
            });
        }
    }
    Ok(rules)
}

pub fn entailments(rules: &[MinedRule]) -> Vec<Entailment> {
    rules.iter().map(|r| r.entailment).collect()
}

pub const DIAGNOSTICS_HEADER: &str = "premise,inverted,conclusion,support,pca_body,pca_confidence";

/// CSV with one row per mined rule. Relation names are quoted when needed.
pub fn diagnostics_csv(rules: &[MinedRule], vocab: &Vocab) -> String {
    let quote = |s: &str| {
        if s.contains([',', '"', '\n']) {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_owned()
        }
    };
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for r in rules {
        let e = &r.entailment;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            quote(vocab.relation_name(e.premise)),
            e.premise_inverted,
            quote(vocab.relation_name(e.conclusion)),
            r.support,
            r.pca_body,
            r.pca_confidence
        );
    }
    out
}

/// Relation pairs grouped by the logical pattern their rules express.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairClasses {
    /// `(p, q)` with `p → q` and `q → p`, `p < q`.
    pub equivalence: Vec<(usize, usize)>,
    /// `(p, q)` with `p⁻¹ → q` and `q⁻¹ → p`, `p ≤ q`.
    pub inversion: Vec<(usize, usize)>,
    /// Rules not part of an equivalence or inversion pair.
    pub others: Vec<Entailment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairClass {
    Equivalence,
    Inversion,
    Others,
}

impl PairClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PairClass::Equivalence => "equivalence",
            PairClass::Inversion => "inversion",
            PairClass::Others => "others",
        }
    }
}

/// Splits rules into equivalence pairs, inversion pairs and the rest. Both
/// directions must clear `thresh`.
pub fn classify_pairs(rules: &[MinedRule], thresh: f64) -> PairClasses {
    classify_entailments(&entailments(rules), thresh)
}

/// [`classify_pairs`] on bare entailments, using `λ` as the confidence.
pub fn classify_entailments(ents: &[Entailment], thresh: f64) -> PairClasses {
    let strong: HashSet<(usize, bool, usize)> = ents
        .iter()
        .filter(|e| e.lambda > thresh)
        .map(|e| (e.premise, e.premise_inverted, e.conclusion))
        .collect();

    let mut classes = PairClasses::default();
    let mut used: HashSet<(usize, bool, usize)> = HashSet::new();
    let mut keys: Vec<_> = strong.iter().copied().collect();
    keys.sort_unstable();
    for (p, inverted, q) in keys {
        let reverse = (q, inverted, p);
        if !strong.contains(&reverse) {
            continue;
        }
        let pair = (p.min(q), p.max(q));
        if inverted {
            if p <= q {
                classes.inversion.push(pair);
            }
        } else if p < q {
            classes.equivalence.push(pair);
        }
        used.insert((p, inverted, q));
        used.insert(reverse);
    }
    classes.others = ents
        .iter()
        .filter(|e| !used.contains(&(e.premise, e.premise_inverted, e.conclusion)))
        .copied()
        .collect();
    classes
}

/// Human-readable rule, e.g. `hypernym^-1 -> hyponym (1.00)`.
pub fn describe(rule: &MinedRule, vocab: &Vocab) -> String {
    let e = &rule.entailment;
    format!(
        "{}{} -> {} ({:.2})",
        vocab.relation_name(e.premise),
        if e.premise_inverted { INVERSE_SUFFIX } else { "" },
        vocab.relation_name(e.conclusion),
        e.lambda
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: usize = 0;
    const Q: usize = 1;

    fn find(rules: &[MinedRule], p: usize, inv: bool, q: usize) -> Option<&MinedRule> {
        rules.iter().find(|r| {
            let e = r.entailment;
            (e.premise, e.premise_inverted, e.conclusion) == (p, inv, q)
        })
    }

    #[test]
    fn pca_body_skips_subjects_without_conclusion() {
        // a=0, b=1, c=2, d=3
        let train = [Triple::new(0, P, 1), Triple::new(0, Q, 1), Triple::new(2, P, 3)];
        let counts = rule_counts(&train);
        assert_eq!(counts[&(P, false, Q)], (1, 1));
        let rules = mine_entailments(&train, 0.8, 1).unwrap();
        let r = find(&rules, P, false, Q).unwrap();
        assert_eq!((r.support, r.pca_body), (1, 1));
        assert_eq!(r.pca_confidence, 1.0);
    }

    #[test]
    fn inverted_premise() {
        let train = [Triple::new(0, P, 1), Triple::new(1, Q, 0)];
        let counts = rule_counts(&train);
        assert_eq!(counts[&(P, true, Q)], (1, 1));
        assert_eq!(counts.get(&(P, false, Q)).map_or(0, |c| c.0), 0);
        let rules = mine_entailments(&train, 0.8, 1).unwrap();
        assert_eq!(find(&rules, P, true, Q).unwrap().pca_confidence, 1.0);
        assert!(find(&rules, P, false, Q).is_none());
    }

    #[test]
    fn threshold_is_strict() {
        let train = [Triple::new(0, P, 1), Triple::new(0, Q, 1)];
        assert!(mine_entailments(&train, 1.0, 1).unwrap().is_empty());
        assert_eq!(mine_entailments(&train, 0.8, 1).unwrap().len(), 2);
        assert!(mine_entailments(&train, 0.0, 1).is_err());
    }

    #[test]
    fn min_support_filters() {
        let train = [Triple::new(0, P, 1), Triple::new(0, Q, 1)];
        assert!(mine_entailments(&train, 0.5, 2).unwrap().is_empty());
    }

    #[test]
    fn symmetric_relation_yields_self_inverse_rule() {
        let train = [Triple::new(0, P, 1), Triple::new(1, P, 0)];
        let rules = mine_entailments(&train, 0.5, 1).unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].entailment.premise_inverted, true);
        assert_eq!(rules[0].entailment.conclusion, P);
    }

    #[test]
    fn duplicates_do_not_change_confidence() {
        let train = [Triple::new(0, P, 1), Triple::new(0, Q, 1), Triple::new(0, P, 2)];
        let doubled: Vec<Triple> = train.iter().chain(train.iter()).copied().collect();
        assert_eq!(rule_counts(&train), rule_counts(&doubled));
    }

    fn rule(p: usize, inv: bool, q: usize, lambda: f64) -> MinedRule {
        MinedRule {
            entailment: Entailment::new(p, inv, q, lambda).unwrap(),
            support: 1,
            pca_body: 1,
            pca_confidence: lambda,
        }
    }

    #[test]
    fn classification() {
        let c = classify_pairs(&[rule(0, false, 1, 0.9), rule(1, false, 0, 0.85)], 0.8);
        assert_eq!(c.equivalence, vec![(0, 1)]);
        assert!(c.inversion.is_empty() && c.others.is_empty());

        let c = classify_pairs(&[rule(0, true, 1, 0.95), rule(1, true, 0, 0.9)], 0.8);
        assert_eq!(c.inversion, vec![(0, 1)]);
        assert!(c.equivalence.is_empty() && c.others.is_empty());

        let c = classify_pairs(&[rule(0, false, 1, 0.9)], 0.8);
        assert_eq!(c.others.len(), 1);
        assert!(c.equivalence.is_empty() && c.inversion.is_empty());

        // one direction below threshold
        let c = classify_pairs(&[rule(0, false, 1, 0.9), rule(1, false, 0, 0.8)], 0.8);
        assert_eq!(c.others.len(), 2);
    }
}
