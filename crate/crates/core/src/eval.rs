//! Filtered link-prediction evaluation and paired significance testing.
//!
//! For every test triple the head is replaced by each entity, candidates
//! that are known true triples (train ∪ valid ∪ test) are dropped, and the
//! gold entity's rank among the remaining scores is recorded. The same is
//! done for the tail. Ranks count strictly greater scores only, so ties
//! never push the gold entity down.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{KnownIndex, Triple, Vocab};
use crate::error::{KgError, Result};
use crate::model::ModelParams;

pub const HITS_AT: [usize; 3] = [1, 3, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Head,
    Tail,
}

/// Whether known triples are removed from the candidate list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Setting {
    #[default]
    Filtered,
    /// Debug only: every corrupted triple competes.
    Raw,
}

fn rank_impl(
    params: &ModelParams,
    t: &Triple,
    side: Side,
    known: &KnownIndex,
    setting: Setting,
) -> usize {
    let (q_re, q_im, gold, filtered) = match side {
        Side::Head => {
            let (q_re, q_im) = params.head_query(t.rel, t.tail);
            (q_re, q_im, t.head, known.heads(t.rel, t.tail))
        }
        Side::Tail => {
            let (q_re, q_im) = params.tail_query(t.head, t.rel);
            (q_re, q_im, t.tail, known.tails(t.head, t.rel))
        }
    };
    let gold_score = params.entity_dot(gold, &q_re, &q_im);
    let mut better = 0;
    for e in 0..params.n_entities() {
        if e == gold || params.entity_dot(e, &q_re, &q_im) <= gold_score {
            continue;
        }
        if setting == Setting::Filtered && filtered.binary_search(&e).is_ok() {
            continue;
        }
        better += 1;
    }
    1 + better
}

/// Filtered rank of the gold entity on `side`.
pub fn filtered_rank(params: &ModelParams, triple: &Triple, side: Side, known: &KnownIndex) -> usize {
    rank_impl(params, triple, side, known, Setting::Filtered)
}

/// Unfiltered rank, for debugging and comparison.
pub fn raw_rank(params: &ModelParams, triple: &Triple, side: Side) -> usize {
    rank_impl(params, triple, side, &KnownIndex::default(), Setting::Raw)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// `(head_rank, tail_rank)` per test triple, in input order.
    pub per_triple: Vec<(usize, usize)>,
    pub mrr: f64,
    /// HITS@n for n in [`HITS_AT`].
    pub hits: BTreeMap<usize, f64>,
}

impl EvalResult {
    pub fn from_ranks(per_triple: Vec<(usize, usize)>) -> Result<Self> {
        if per_triple.is_empty() {
            return Err(KgError::argument("cannot evaluate an empty test set"));
        }
        let count = 2.0 * per_triple.len() as f64;
        let ranks = || per_triple.iter().flat_map(|&(h, t)| [h, t]);
        let mrr = ranks().map(|r| 1.0 / r as f64).sum::<f64>() / count;
        let hits = HITS_AT
            .iter()
            .map(|&n| (n, ranks().filter(|&r| r <= n).count() as f64 / count))
            .collect();
        Ok(EvalResult {
            per_triple,
            mrr,
            hits,
        })
    }

    pub fn hits_at(&self, n: usize) -> f64 {
        self.hits.get(&n).copied().unwrap_or_else(|| {
            let ranks = self.per_triple.iter().flat_map(|&(h, t)| [h, t]);
            ranks.filter(|&r| r <= n).count() as f64 / (2 * self.per_triple.len()) as f64
        })
    }

    /// Reciprocal ranks, head then tail for each triple.
    pub fn reciprocal_ranks(&self) -> Vec<f64> {
        self.per_triple
            .iter()
            .flat_map(|&(h, t)| [1.0 / h as f64, 1.0 / t as f64])
            .collect()
    }

    /// 0/1 HITS@n indicators in the same order as [`Self::reciprocal_ranks`].
    pub fn hit_flags(&self, n: usize) -> Vec<f64> {
        self.per_triple
            .iter()
            .flat_map(|&(h, t)| [f64::from(u8::from(h <= n)), f64::from(u8::from(t <= n))])
            .collect()
    }
}

/// Ranks both sides of every test triple in parallel.
pub fn evaluate_with(
    params: &ModelParams,
    test: &[Triple],
    known: &KnownIndex,
    setting: Setting,
) -> Result<EvalResult> {
    if test.is_empty() {
        return Err(KgError::argument("cannot evaluate an empty test set"));
    }
    for t in test {
        params.check_triple(t)?;
    }
    let per_triple = test
        .par_iter()
        .map(|t| {
            (
                rank_impl(params, t, Side::Head, known, setting),
                rank_impl(params, t, Side::Tail, known, setting),
            )
        })
        .collect();
    EvalResult::from_ranks(per_triple)
}

pub fn evaluate(params: &ModelParams, test: &[Triple], known: &KnownIndex) -> Result<EvalResult> {
    evaluate_with(params, test, known, Setting::Filtered)
}

/// Two-sided p-value of the paired t statistic on `a − b`.
///
/// Zero-variance differences give `1.0` when their mean is zero and `0.0`
/// otherwise.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(KgError::argument(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(KgError::argument("paired t-test needs at least 2 pairs"));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(if mean == 0.0 { 1.0 } else { 0.0 });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| KgError::argument(e.to_string()))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// One line of a per-triple rank dump.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankRecord {
    pub head: String,
    pub rel: String,
    pub tail: String,
    pub head_rank: usize,
    pub tail_rank: usize,
}

pub const RANK_DUMP_HEADER: [&str; 5] = ["head", "rel", "tail", "head_rank", "tail_rank"];

pub fn rank_records(test: &[Triple], result: &EvalResult, vocab: &Vocab) -> Vec<RankRecord> {
    test.iter()
        .zip(&result.per_triple)
        .map(|(t, &(head_rank, tail_rank))| RankRecord {
            head: vocab.entity_name(t.head).to_owned(),
            rel: vocab.relation_name(t.rel).to_owned(),
            tail: vocab.entity_name(t.tail).to_owned(),
            head_rank,
            tail_rank,
        })
        .collect()
}

pub fn write_rank_dump(path: &Path, records: &[RankRecord]) -> Result<()> {
    let csv_err = |e: csv::Error| KgError::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(RANK_DUMP_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.head.as_str(),
            r.rel.as_str(),
            r.tail.as_str(),
            &r.head_rank.to_string(),
            &r.tail_rank.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| KgError::io(path, e))
}

pub fn read_rank_dump(path: &Path) -> Result<Vec<RankRecord>> {
    let csv_err = |e: csv::Error| KgError::io(path, e.into());
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let parse_err = |message: String| KgError::Parse {
            path: path.to_owned(),
            line: i + 2,
            message,
        };
        if row.len() != 5 {
            return Err(parse_err(format!("expected 5 fields, found {}", row.len())));
        }
        let rank = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|&r| r >= 1)
                .ok_or_else(|| parse_err(format!("bad rank `{s}`")))
        };
        out.push(RankRecord {
            head: row[0].to_owned(),
            rel: row[1].to_owned(),
            tail: row[2].to_owned(),
            head_rank: rank(&row[3])?,
            tail_rank: rank(&row[4])?,
        });
    }
    Ok(out)
}

/// p-values comparing two runs on the same test triples, keyed by metric
/// name (`mrr`, `hits@1`, `hits@3`, `hits@10`). Head and tail ranks are
/// separate paired observations.
pub fn compare_runs(a: &[RankRecord], b: &[RankRecord]) -> Result<Vec<(String, f64, f64, f64)>> {
    if a.len() != b.len() {
        return Err(KgError::argument(format!(
            "rank dumps cover {} and {} triples",
            a.len(),
            b.len()
        )));
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if (&x.head, &x.rel, &x.tail) != (&y.head, &y.rel, &y.tail) {
            return Err(KgError::argument(format!(
                "rank dumps disagree on triple {}",
                i + 1
            )));
        }
    }
    let to_result = |recs: &[RankRecord]| {
        EvalResult::from_ranks(recs.iter().map(|r| (r.head_rank, r.tail_rank)).collect())
    };
    let (ra, rb) = (to_result(a)?, to_result(b)?);
    let mut rows = vec![(
        "mrr".to_owned(),
        ra.mrr,
        rb.mrr,
        paired_ttest(&ra.reciprocal_ranks(), &rb.reciprocal_ranks())?,
    )];
    for n in HITS_AT {
        rows.push((
            format!("hits@{n}"),
            ra.hits_at(n),
            rb.hits_at(n),
            paired_ttest(&ra.hit_flags(n), &rb.hit_flags(n))?,
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Entities 0..4 on one real dimension; relation 0 is the identity, so
    /// `score(h, 0, t) = ReE_h · ReE_t`.
    fn line_model(values: &[f64]) -> ModelParams {
        ModelParams::from_blocks(
            1,
            values.to_vec(),
            vec![0.0; values.len()],
            vec![1.0],
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn rank_counts_strictly_better() {
        // head fixed at entity 0: tail scores are 0.1 × entity value
        let p = line_model(&[0.1, 0.9, 0.95, 0.8]);
        let gold = Triple::new(0, 0, 1);
        let known = KnownIndex::from_triples(&[gold]);
        assert_eq!(filtered_rank(&p, &gold, Side::Tail, &known), 2);

        let known = KnownIndex::from_triples(&[gold, Triple::new(0, 0, 2)]);
        assert_eq!(filtered_rank(&p, &gold, Side::Tail, &known), 1);

        let top = Triple::new(0, 0, 2);
        assert_eq!(filtered_rank(&p, &top, Side::Tail, &KnownIndex::default()), 1);
    }

    #[test]
    fn ties_do_not_hurt() {
        let p = line_model(&[0.1, 0.5, 0.5, 0.5]);
        let gold = Triple::new(0, 0, 1);
        assert_eq!(raw_rank(&p, &gold, Side::Tail), 1);
    }

    #[test]
    fn aggregate_arithmetic() {
        let r = EvalResult::from_ranks(vec![(2, 1)]).unwrap();
        assert!((r.mrr - 0.75).abs() < 1e-15);
        assert_eq!(r.hits_at(1), 0.5);
        assert_eq!(r.hits_at(3), 1.0);
        assert_eq!(r.hits_at(10), 1.0);

        let r = EvalResult::from_ranks(vec![(1, 1), (1, 1)]).unwrap();
        assert_eq!(r.mrr, 1.0);
        assert!(r.hits.values().all(|&h| h == 1.0));
        assert!(EvalResult::from_ranks(vec![]).is_err());
    }

    #[test]
    fn empty_test_set_is_an_error() {
        let p = line_model(&[1.0, 0.5]);
        assert!(evaluate(&p, &[], &KnownIndex::default()).is_err());
    }

    #[test]
    fn ttest_cases() {
        let a = [0.3, 0.2, 0.9];
        assert_eq!(paired_ttest(&a, &a).unwrap(), 1.0);

        let p = paired_ttest(&[1.0, 1.0, 1.0, 0.0], &[0.0; 4]).unwrap();
        // scipy: 2 * t.sf(3.0, df=3)
        assert!((p - 0.057_668_885_622_437_31).abs() < 1e-10, "p = {p}");

        let a = [0.1, -0.1, 0.1, -0.1];
        assert_eq!(paired_ttest(&a, &[0.0; 4]).unwrap(), 1.0);

        assert_eq!(paired_ttest(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(paired_ttest(&[1.0, 2.0], &[1.0]).is_err());
        assert!(paired_ttest(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn rank_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ranks.csv");
        let records = vec![
            RankRecord {
                head: "a,b".into(),
                rel: "p".into(),
                tail: "\"c\"".into(),
                head_rank: 3,
                tail_rank: 1,
            },
            RankRecord {
                head: "x".into(),
                rel: "q".into(),
                tail: "y".into(),
                head_rank: 1,
                tail_rank: 10,
            },
        ];
        write_rank_dump(&path, &records).unwrap();
        assert_eq!(read_rank_dump(&path).unwrap(), records);

        let rows = compare_runs(&records, &records).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.3 == 1.0));
        assert!(compare_runs(&records, &records[..1]).is_err());
    }
}
