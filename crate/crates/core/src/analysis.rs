//! Interpretability analyses of learned entity and relation embeddings.
//!
//! Entropies use the natural logarithm.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Entailment, NameTable, Vocab};
use crate::error::{KgError, NameKind, Result};
use crate::miner::PairClass;
use crate::model::ModelParams;

/// Which entity component is analysed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Real,
    Imaginary,
}

impl Part {
    pub fn as_str(self) -> &'static str {
        match self {
            Part::Real => "real",
            Part::Imaginary => "imag",
        }
    }
}

/// Borrowed row-major `rows × cols` matrix.
#[derive(Debug, Clone, Copy)]
pub struct MatrixView<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
}

impl<'a> MatrixView<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(KgError::argument(format!(
                "matrix of {} values is not {rows}×{cols}",
                data.len()
            )));
        }
        Ok(MatrixView { data, rows, cols })
    }

    pub fn entities(params: &'a ModelParams, part: Part) -> Self {
        let data = match part {
            Part::Real => &params.re_e,
            Part::Imaginary => &params.im_e,
        };
        MatrixView {
            data,
            rows: params.n_entities(),
            cols: params.dim(),
        }
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// One type label per entity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TypeLabels {
    pub labels: BTreeMap<usize, usize>,
    pub types: NameTable,
}

impl TypeLabels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entity: usize, type_name: &str) {
        let ty = self.types.intern(type_name);
        self.labels.insert(entity, ty);
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    /// Loads `entity_name<TAB>type_name` lines. Entities must be in `vocab`.
    pub fn load(path: &Path, vocab: &Vocab) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| KgError::io(path, e))?;
        let mut labels = TypeLabels::new();
        for (i, line) in text.split_terminator('\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let Some((entity, ty)) = line.split_once('\t') else {
                return Err(KgError::Parse {
                    path: path.to_owned(),
                    line: i + 1,
                    message: "expected entity<TAB>type".into(),
                });
            };
            labels.insert(vocab.entity_id(entity)?, ty);
        }
        Ok(labels)
    }

    fn check(&self, n: usize) -> Result<()> {
        match self.labels.keys().next_back() {
            Some(&id) if id >= n => Err(KgError::Index {
                kind: NameKind::Entity,
                id,
                size: n,
            }),
            _ => Ok(()),
        }
    }
}

/// Affine rescale to `[0, 1]`; constant vectors map to zeros.
pub fn minmax_normalize(x: &[f64]) -> Vec<f64> {
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    if !(span > 0.0) {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| ((v - min) / span).clamp(0.0, 1.0)).collect()
}

/// Shannon entropy (nats) of a histogram.
pub fn entropy(counts: impl IntoIterator<Item = usize>) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let h = -counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>();
    h.max(0.0)
}

/// Number of entities taken as the top `k_percent` of `n_labeled`.
pub fn top_k_count(k_percent: f64, n_labeled: usize) -> usize {
    ((k_percent / 100.0 * n_labeled as f64).ceil() as usize).clamp(1, n_labeled)
}

/// Mean over dimensions of the type entropy among the top `k_percent` of
/// labelled entities by activation. Ties go to the lower entity id.
pub fn dimension_purity(component: MatrixView<'_>, labels: &TypeLabels, k_percent: f64) -> Result<f64> {
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(KgError::Range {
            what: "K percent",
            value: k_percent,
            range: "(0, 100]",
        });
    }
    if labels.labels.is_empty() {
        return Err(KgError::argument("no labelled entities"));
    }
    if component.cols == 0 {
        return Err(KgError::argument("zero-dimensional component"));
    }
    labels.check(component.rows)?;

    let labeled: Vec<(usize, usize)> = labels.labels.iter().map(|(&e, &t)| (e, t)).collect();
    let k = top_k_count(k_percent, labeled.len());
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    let mut total = 0.0;
    for dim in 0..component.cols {
        let act = |i: usize| component.get(labeled[i].0, dim);
        // labeled is sorted by entity id, so a stable sort keeps lower ids first on ties
        order.sort_by(|&a, &b| act(b).total_cmp(&act(a)).then(a.cmp(&b)));
        let mut hist = vec![0usize; labels.n_types()];
        for &i in &order[..k] {
            hist[labeled[i].1] += 1;
        }
        total += entropy(hist);
    }
    Ok(total / component.cols as f64)
}

/// `(K, mean entropy)` points for every requested K.
#[derive(Debug, Clone, PartialEq)]
pub struct PurityCurve {
    pub points: Vec<(f64, f64)>,
}

pub fn purity_curve(component: MatrixView<'_>, labels: &TypeLabels, ks: &[f64]) -> Result<PurityCurve> {
    let points = ks
        .iter()
        .map(|&k| Ok((k, dimension_purity(component, labels, k)?)))
        .collect::<Result<_>>()?;
    Ok(PurityCurve { points })
}

/// CSV with one `K,mean_entropy_nats` row per point, one column per model.
pub fn purity_csv(models: &[(&str, &PurityCurve)]) -> String {
    let mut out = String::from("K");
    for (name, _) in models {
        let _ = write!(out, ",{name}_mean_entropy_nats");
    }
    out.push('\n');
    let Some((_, first)) = models.first() else {
        return out;
    };
    for (row, &(k, _)) in first.points.iter().enumerate() {
        let _ = write!(out, "{k}");
        for (_, curve) in models {
            match curve.points.get(row) {
                Some(&(_, h)) => {
                    let _ = write!(out, ",{h}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// Per-entity min-max normalized rows, labelled with entity and type names,
/// one column per dimension.
pub fn heatmap_csv(
    component: MatrixView<'_>,
    entities: &[usize],
    vocab: &Vocab,
    labels: &TypeLabels,
) -> Result<String> {
    let mut out = String::from("entity,type");
    for l in 0..component.cols {
        let _ = write!(out, ",d{l}");
    }
    out.push('\n');
    for &e in entities {
        if e >= component.rows {
            return Err(KgError::Index {
                kind: NameKind::Entity,
                id: e,
                size: component.rows,
            });
        }
        let ty = labels
            .labels
            .get(&e)
            .and_then(|&t| labels.types.name(t))
            .unwrap_or("");
        let _ = write!(out, "{},{}", csv_field(vocab.entity_name(e)), csv_field(ty));
        for v in minmax_normalize(component.row(e)) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Picks up to `per_type` labelled entities of each type (seeded), grouped
/// by type in type-id order.
pub fn sample_entities_by_type(labels: &TypeLabels, per_type: usize, seed: u64) -> Vec<usize> {
    let mut by_type: HashMap<usize, Vec<usize>> = HashMap::new();
    for (&e, &t) in &labels.labels {
        by_type.entry(t).or_default().push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for t in 0..labels.n_types() {
        let Some(members) = by_type.get(&t) else { continue };
        let take = per_type.min(members.len());
        let mut picked: Vec<usize> = sample(&mut rng, members.len(), take)
            .into_iter()
            .map(|i| members[i])
            .collect();
        picked.sort_unstable();
        out.extend(picked);
    }
    out
}

/// Seeded choice of `k` distinct dimensions out of `d`, sorted.
pub fn sample_dimensions(d: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims = sample(&mut rng, d, k.min(d)).into_vec();
    dims.sort_unstable();
    dims
}

/// How far a relation pair is from the pattern its class predicts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairReport {
    pub class: PairClass,
    /// `‖r_p − r_q‖∞` (equivalence), `‖r_p − conj(r_q)‖∞` (inversion), or
    /// the largest `Re(r_p) − Re(r_q)` violation clipped at 0 (others).
    pub residual: f64,
    /// `‖Im(r_p) − Im(r_q)‖∞`, reported for the others class.
    pub imag_gap: Option<f64>,
}

pub fn relation_pair_diagnostic(
    params: &ModelParams,
    p: usize,
    q: usize,
    class: PairClass,
) -> Result<PairReport> {
    params.check_relation(p)?;
    params.check_relation(q)?;
    let (pr, pi) = (params.relation_re(p), params.relation_im(p));
    let (qr, qi) = (params.relation_re(q), params.relation_im(q));
    let inf_norm = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |m, x| m.max(x.abs()));
    let d = params.dim();
    let report = match class {
        PairClass::Equivalence => PairReport {
            class,
            residual: inf_norm(&mut (0..d).flat_map(|l| [pr[l] - qr[l], pi[l] - qi[l]])),
            imag_gap: None,
        },
        PairClass::Inversion => PairReport {
            class,
            residual: inf_norm(&mut (0..d).flat_map(|l| [pr[l] - qr[l], pi[l] + qi[l]])),
            imag_gap: None,
        },
        PairClass::Others => PairReport {
            class,
            residual: (0..d).map(|l| pr[l] - qr[l]).fold(0.0f64, f64::max),
            imag_gap: Some(inf_norm(&mut (0..d).map(|l| pi[l] - qi[l]))),
        },
    };
    Ok(report)
}

/// Others-class diagnostic for a single rule, conjugating the premise when
/// it is inverted.
pub fn rule_diagnostic(params: &ModelParams, rule: &Entailment) -> Result<PairReport> {
    let mut report = relation_pair_diagnostic(params, rule.premise, rule.conclusion, PairClass::Others)?;
    if rule.premise_inverted {
        let (pi, qi) = (params.relation_im(rule.premise), params.relation_im(rule.conclusion));
        let gap = pi.iter().zip(qi).fold(0.0f64, |m, (a, b)| m.max((-a - b).abs()));
        report.imag_gap = Some(gap);
    }
    Ok(report)
}
