//! Penalty-form training objective and its exact sparse gradient.
//!
//! For a mini-batch `B` of labelled triples and the entailment set `T`:
//!
//! ```text
//! L = Σ_B softplus(−y·φ(h, r, t))
//!   + μ Σ_T λ·1ᵀ[Re(r_p*) − Re(r_q)]₊ + λ·1ᵀ(Im(r_p*) − Im(r_q))²
//!   + η ‖Θ_touched‖²
//! ```
//!
//! `r_p*` is the premise relation, or its conjugate when the premise is
//! inverted. The two penalty sums are the closed-form minimum over the slack
//! variables of the constrained problem; [`slack_objective`] keeps that
//! constrained form around for checking.

use std::collections::{BTreeMap, BTreeSet};

use crate::data::{Entailment, Triple};
use crate::model::ModelParams;

/// Positive (observed) or negative (corrupted) example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrainingExample {
    pub triple: Triple,
    pub label: Label,
}

impl TrainingExample {
    pub fn positive(triple: Triple) -> Self {
        TrainingExample {
            triple,
            label: Label::Positive,
        }
    }

    pub fn negative(triple: Triple) -> Self {
        TrainingExample {
            triple,
            label: Label::Negative,
        }
    }
}

/// Unweighted loss terms of one batch. `total` applies `μ` and `η`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub logistic: f64,
    pub entailment_penalty: f64,
    pub l2: f64,
    pub total: f64,
}

impl std::ops::AddAssign for LossBreakdown {
    fn add_assign(&mut self, rhs: Self) {
        self.logistic += rhs.logistic;
        self.entailment_penalty += rhs.entailment_penalty;
        self.l2 += rhs.l2;
        self.total += rhs.total;
    }
}

/// Which rows the L2 term covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum L2Scope {
    /// Rows touched by the batch plus every relation named in `T`.
    #[default]
    Touched,
    /// Every row of every matrix.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    pub mu: f64,
    pub eta: f64,
    pub l2_scope: L2Scope,
}

/// Entity and relation rows a batch (and the entailment set) touches.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TouchedRows {
    pub entities: BTreeSet<usize>,
    pub relations: BTreeSet<usize>,
}

impl TouchedRows {
    pub fn collect(batch: &[TrainingExample], ents: &[Entailment]) -> Self {
        let mut rows = TouchedRows::default();
        for ex in batch {
            rows.entities.insert(ex.triple.head);
            rows.entities.insert(ex.triple.tail);
            rows.relations.insert(ex.triple.rel);
        }
        for e in ents {
            rows.relations.insert(e.premise);
            rows.relations.insert(e.conclusion);
        }
        rows
    }

    pub fn all(params: &ModelParams) -> Self {
        TouchedRows {
            entities: (0..params.n_entities()).collect(),
            relations: (0..params.n_relations()).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.relations.is_empty()
    }
}

/// Gradient for one embedding row, split into real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct RowGrad {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl RowGrad {
    fn zeros(d: usize) -> Self {
        RowGrad {
            re: vec![0.0; d],
            im: vec![0.0; d],
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.re.iter().chain(&self.im)
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.re.iter_mut().chain(self.im.iter_mut())
    }
}

/// Gradient restricted to the rows a batch touches. Ordered maps keep
/// iteration (and therefore floating-point reductions) deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrad {
    d: usize,
    pub entities: BTreeMap<usize, RowGrad>,
    pub relations: BTreeMap<usize, RowGrad>,
}

impl SparseGrad {
    pub fn new(d: usize) -> Self {
        SparseGrad {
            d,
            entities: BTreeMap::new(),
            relations: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn entity_mut(&mut self, i: usize) -> &mut RowGrad {
        let d = self.d;
        self.entities.entry(i).or_insert_with(|| RowGrad::zeros(d))
    }

    pub fn relation_mut(&mut self, k: usize) -> &mut RowGrad {
        let d = self.d;
        self.relations.entry(k).or_insert_with(|| RowGrad::zeros(d))
    }

    fn rows(&self) -> impl Iterator<Item = &RowGrad> {
        self.entities.values().chain(self.relations.values())
    }

    /// Global L2 norm over every stored entry.
    pub fn norm(&self) -> f64 {
        self.rows()
            .flat_map(RowGrad::values)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, c: f64) {
        for row in self.entities.values_mut().chain(self.relations.values_mut()) {
            for g in row.values_mut() {
                *g *= c;
            }
        }
    }

    /// Rescales so the global norm is at most `cap`. Returns the pre-clip norm.
    pub fn clip_norm(&mut self, cap: f64) -> f64 {
        let norm = self.norm();
        if norm > cap && norm > 0.0 {
            self.scale(cap / norm);
        }
        norm
    }

    pub fn is_finite(&self) -> bool {
        self.rows().flat_map(RowGrad::values).all(|g| g.is_finite())
    }
}

/// `ln(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic function `1 / (1 + e⁻ˣ)` without overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logistic_term(params: &ModelParams, examples: &[TrainingExample]) -> f64 {
    examples
        .iter()
        .map(|ex| {
            let t = ex.triple;
            softplus(-ex.label.sign() * params.score(t.head, t.rel, t.tail))
        })
        .sum()
}

/// Sign applied to the premise's imaginary part (conjugation for inverted
/// premises).
fn premise_sign(e: &Entailment) -> f64 {
    if e.premise_inverted {
        -1.0
    } else {
        1.0
    }
}

/// `λ·1ᵀ[ΔRe]₊ + λ·1ᵀ(ΔIm)²` for a single constraint.
pub fn constraint_penalty(params: &ModelParams, e: &Entailment) -> f64 {
    let s = premise_sign(e);
    let (pr, pi) = (params.relation_re(e.premise), params.relation_im(e.premise));
    let (qr, qi) = (params.relation_re(e.conclusion), params.relation_im(e.conclusion));
    let mut hinge = 0.0;
    let mut square = 0.0;
    for l in 0..params.dim() {
        hinge += (pr[l] - qr[l]).max(0.0);
        let dim = s * pi[l] - qi[l];
        square += dim * dim;
    }
    e.lambda * hinge + e.lambda * square
}

pub fn entailment_penalty(params: &ModelParams, ents: &[Entailment]) -> f64 {
    ents.iter().map(|e| constraint_penalty(params, e)).sum()
}

/// Sum of squares over the given entity and relation rows.
pub fn l2_term(params: &ModelParams, touched: &TouchedRows) -> f64 {
    let sq = |xs: &[f64]| xs.iter().map(|x| x * x).sum::<f64>();
    let entities: f64 = touched
        .entities
        .iter()
        .map(|&i| sq(params.entity_re(i)) + sq(params.entity_im(i)))
        .sum();
    let relations: f64 = touched
        .relations
        .iter()
        .map(|&k| sq(params.relation_re(k)) + sq(params.relation_im(k)))
        .sum();
    entities + relations
}

/// Slack-variable form of one constraint: `1ᵀ(α + β)` for slacks that must
/// satisfy `λ·ΔRe ≤ α`, `λ·ΔIm² ≤ β`, `α, β ≥ 0`. Returns `None` when the
/// slacks are infeasible.
pub fn slack_objective(
    params: &ModelParams,
    e: &Entailment,
    alpha: &[f64],
    beta: &[f64],
) -> Option<f64> {
    let s = premise_sign(e);
    let (pr, pi) = (params.relation_re(e.premise), params.relation_im(e.premise));
    let (qr, qi) = (params.relation_re(e.conclusion), params.relation_im(e.conclusion));
    let mut total = 0.0;
    for l in 0..params.dim() {
        let dim = s * pi[l] - qi[l];
        let feasible = alpha[l] >= 0.0
            && beta[l] >= 0.0
            && e.lambda * (pr[l] - qr[l]) <= alpha[l]
            && e.lambda * dim * dim <= beta[l];
        if !feasible {
            return None;
        }
        total += alpha[l] + beta[l];
    }
    Some(total)
}

/// Loss terms of a batch and the gradient over every row the batch or the
/// entailment set touches. The hinge contributes subgradient 0 at its kink.
pub fn loss_and_gradient(
    params: &ModelParams,
    batch: &[TrainingExample],
    ents: &[Entailment],
    weights: &ObjectiveWeights,
) -> (LossBreakdown, SparseGrad) {
    let d = params.dim();
    let mut grad = SparseGrad::new(d);
    let mut loss = LossBreakdown::default();

    for ex in batch {
        let Triple { head, rel, tail } = ex.triple;
        let y = ex.label.sign();
        let margin = -y * params.score(head, rel, tail);
        loss.logistic += softplus(margin);
        // d softplus(−yφ) / dφ
        let c = -y * sigmoid(margin);

        let (hr, hi) = (params.entity_re(head), params.entity_im(head));
        let (tr, ti) = (params.entity_re(tail), params.entity_im(tail));
        let (rr, ri) = (params.relation_re(rel), params.relation_im(rel));

        let g = grad.entity_mut(head);
        for l in 0..d {
            g.re[l] += c * (rr[l] * tr[l] + ri[l] * ti[l]);
            g.im[l] += c * (rr[l] * ti[l] - ri[l] * tr[l]);
        }
        let g = grad.entity_mut(tail);
        for l in 0..d {
            g.re[l] += c * (hr[l] * rr[l] - hi[l] * ri[l]);
            g.im[l] += c * (hi[l] * rr[l] + hr[l] * ri[l]);
        }
        let g = grad.relation_mut(rel);
        for l in 0..d {
            g.re[l] += c * (hr[l] * tr[l] + hi[l] * ti[l]);
            g.im[l] += c * (hr[l] * ti[l] - hi[l] * tr[l]);
        }
    }

    for e in ents {
        let s = premise_sign(e);
        let w = weights.mu * e.lambda;
        let (pr, pi) = (params.relation_re(e.premise), params.relation_im(e.premise));
        let (qr, qi) = (params.relation_re(e.conclusion), params.relation_im(e.conclusion));
        let mut hinge = 0.0;
        let mut square = 0.0;
        let mut dp = RowGrad::zeros(d);
        let mut dq = RowGrad::zeros(d);
        for l in 0..d {
            let dre = pr[l] - qr[l];
            if dre > 0.0 {
                hinge += dre;
                dp.re[l] += w;
                dq.re[l] -= w;
            }
            let dim = s * pi[l] - qi[l];
            square += dim * dim;
            dp.im[l] += 2.0 * w * dim * s;
            dq.im[l] -= 2.0 * w * dim;
        }
        loss.entailment_penalty += e.lambda * (hinge + square);
        // premise and conclusion may be the same row (r⁻¹ → r)
        for (k, row) in [(e.premise, dp), (e.conclusion, dq)] {
            let g = grad.relation_mut(k);
            for (acc, v) in g.values_mut().zip(row.values()) {
                *acc += v;
            }
        }
    }

    let touched = match weights.l2_scope {
        L2Scope::Touched => TouchedRows::collect(batch, ents),
        L2Scope::Full => TouchedRows::all(params),
    };
    loss.l2 = l2_term(params, &touched);
    if weights.eta != 0.0 {
        let k = 2.0 * weights.eta;
        for &i in &touched.entities {
            let (xr, xi) = (params.entity_re(i), params.entity_im(i));
            let g = grad.entity_mut(i);
            for l in 0..d {
                g.re[l] += k * xr[l];
                g.im[l] += k * xi[l];
            }
        }
        for &r in &touched.relations {
            let (xr, xi) = (params.relation_re(r), params.relation_im(r));
            let g = grad.relation_mut(r);
            for l in 0..d {
                g.re[l] += k * xr[l];
                g.im[l] += k * xi[l];
            }
        }
    }

    loss.total = loss.logistic + weights.mu * loss.entailment_penalty + weights.eta * loss.l2;
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(h: usize, r: usize, t: usize, positive: bool) -> TrainingExample {
        let t = Triple::new(h, r, t);
        if positive {
            TrainingExample::positive(t)
        } else {
            TrainingExample::negative(t)
        }
    }

    /// Two relations in d=2 with the given differences; relation 1 is zero.
    fn rel_pair(dre: [f64; 2], dim: [f64; 2]) -> ModelParams {
        ModelParams::from_blocks(
            2,
            vec![0.0; 2],
            vec![0.0; 2],
            vec![dre[0], dre[1], 0.0, 0.0],
            vec![dim[0], dim[1], 0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((softplus(-50.0) - (-50f64).exp()).abs() < 1e-30);
        assert!((softplus(50.0) - 50.0).abs() < 1e-12);
        assert!(softplus(1e4).is_finite());
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-1e4) >= 0.0 && sigmoid(1e4) <= 1.0);
    }

    #[test]
    fn logistic_term_cases() {
        let zero = ModelParams::zeros(2, 1, 3);
        assert!((logistic_term(&zero, &[ex(0, 0, 1, true)]) - 0.693147).abs() < 1e-6);
        assert_eq!(logistic_term(&zero, &[]), 0.0);

        // φ = 50 with d=1: all components one except ReR = 50
        let p = ModelParams::from_blocks(1, vec![1.0, 1.0], vec![0.0, 0.0], vec![50.0], vec![0.0])
            .unwrap();
        assert_eq!(p.score(0, 0, 1), 50.0);
        let pos = logistic_term(&p, &[ex(0, 0, 1, true)]);
        assert!((pos - (-50f64).exp()).abs() < 1e-30);
        let neg = logistic_term(&p, &[ex(0, 0, 1, false)]);
        assert!((neg - 50.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_hand_value() {
        let p = rel_pair([0.2, -0.1], [0.1, 0.0]);
        let e = Entailment::new(0, false, 1, 0.9).unwrap();
        let expected = 0.9 * 0.2 + 0.9 * 0.01;
        assert!((entailment_penalty(&p, &[e]) - 0.189).abs() < 1e-12);
        assert!((entailment_penalty(&p, &[e]) - expected).abs() < 1e-15);
    }

    #[test]
    fn penalty_zero_cases() {
        let p = ModelParams::init(1, 2, 4, 5).unwrap();
        let e = Entailment::new(0, false, 1, 0.7).unwrap();
        let mut same = p.clone();
        same.re_r.copy_within(4..8, 0);
        same.im_r.copy_within(4..8, 0);
        assert_eq!(entailment_penalty(&same, &[e]), 0.0);

        let sat = rel_pair([-0.3, -0.1], [0.0, 0.0]);
        assert_eq!(entailment_penalty(&sat, &[e]), 0.0);
    }

    #[test]
    fn inverted_premise_uses_conjugate() {
        // Im(p) = 0.4, Im(q) = −0.4 → conj(p) matches q exactly
        let p = ModelParams::from_blocks(1, vec![0.0], vec![0.0], vec![0.1, 0.1], vec![0.4, -0.4])
            .unwrap();
        let inv = Entailment::new(0, true, 1, 1.0).unwrap();
        let fwd = Entailment::new(0, false, 1, 1.0).unwrap();
        assert_eq!(entailment_penalty(&p, &[inv]), 0.0);
        assert!((entailment_penalty(&p, &[fwd]) - 0.64).abs() < 1e-12);
    }

    #[test]
    fn l2_cases() {
        let zero = ModelParams::zeros(2, 2, 2);
        assert_eq!(l2_term(&zero, &TouchedRows::all(&zero)), 0.0);

        let mut p = ModelParams::zeros(2, 1, 2);
        p.re_e[..2].copy_from_slice(&[0.5, 0.5]);
        let rows = TouchedRows {
            entities: [0].into(),
            relations: Default::default(),
        };
        assert_eq!(l2_term(&p, &rows), 0.5);
        assert_eq!(l2_term(&p, &TouchedRows::default()), 0.0);
    }

    #[test]
    fn zero_score_gradient_is_half_score_gradient() {
        let mut p = ModelParams::init(3, 1, 4, 9).unwrap();
        // ImR = 0 and ReE_tail = 0 → φ = Σ ImE_h ReR ImE_t, zeroed via ReR on a single coordinate
        p.im_r.iter_mut().for_each(|x| *x = 0.0);
        p.re_r.iter_mut().for_each(|x| *x = 0.0);
        p.re_r[0] = 1.0;
        p.re_e[2 * 4] = 0.0;
        p.im_e[2 * 4] = 0.0;
        assert_eq!(p.score(0, 0, 2), 0.0);
        let weights = ObjectiveWeights {
            mu: 0.0,
            eta: 0.0,
            l2_scope: L2Scope::Touched,
        };
        let (_, grad) = loss_and_gradient(&p, &[ex(0, 0, 2, true)], &[], &weights);
        let (b_re, b_im) = p.head_query(0, 2);
        let g = &grad.entities[&0];
        for l in 0..4 {
            assert!((g.re[l] + 0.5 * b_re[l]).abs() < 1e-15);
            assert!((g.im[l] + 0.5 * b_im[l]).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_sparsity() {
        let p = ModelParams::init(6, 4, 3, 1).unwrap();
        let ents = [Entailment::new(2, true, 3, 0.9).unwrap()];
        let weights = ObjectiveWeights {
            mu: 1.0,
            eta: 0.1,
            l2_scope: L2Scope::Touched,
        };
        let (_, grad) = loss_and_gradient(&p, &[ex(0, 0, 1, true), ex(4, 0, 1, false)], &ents, &weights);
        assert_eq!(grad.entities.keys().copied().collect::<Vec<_>>(), vec![0, 1, 4]);
        assert_eq!(grad.relations.keys().copied().collect::<Vec<_>>(), vec![0, 2, 3]);

        let full = ObjectiveWeights {
            l2_scope: L2Scope::Full,
            ..weights
        };
        let (_, grad) = loss_and_gradient(&p, &[ex(0, 0, 1, true)], &ents, &full);
        assert_eq!(grad.entities.len(), 6);
        assert_eq!(grad.relations.len(), 4);
    }

    #[test]
    fn total_recombines_terms() {
        let p = ModelParams::init(5, 3, 4, 2).unwrap();
        let batch = [ex(0, 0, 1, true), ex(2, 1, 3, false), ex(4, 2, 0, true)];
        let ents = [
            Entailment::new(0, false, 1, 0.8).unwrap(),
            Entailment::new(2, true, 0, 0.95).unwrap(),
        ];
        let weights = ObjectiveWeights {
            mu: 0.7,
            eta: 0.01,
            l2_scope: L2Scope::Touched,
        };
        let (loss, _) = loss_and_gradient(&p, &batch, &ents, &weights);
        let touched = TouchedRows::collect(&batch, &ents);
        let expected = logistic_term(&p, &batch)
            + 0.7 * entailment_penalty(&p, &ents)
            + 0.01 * l2_term(&p, &touched);
        assert!((loss.total - expected).abs() < 1e-12);
    }

    #[test]
    fn clip_norm_caps_global_norm() {
        let mut g = SparseGrad::new(2);
        g.entity_mut(0).re = vec![3.0, 0.0];
        g.relation_mut(1).im = vec![0.0, 4.0];
        assert_eq!(g.clip_norm(1.0), 5.0);
        assert!((g.norm() - 1.0).abs() < 1e-15);
        assert!((g.entities[&0].re[0] - 0.6).abs() < 1e-15);
        let before = g.clone();
        g.clip_norm(10.0);
        assert_eq!(g, before);
    }
}
