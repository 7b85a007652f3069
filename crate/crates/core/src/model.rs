//! Complex-valued entity and relation embeddings.
//!
//! Every embedding is stored as two real components (real and imaginary
//! part), giving four row-major matrices: entity real/imaginary (`n × d`)
//! and relation real/imaginary (`m × d`).
//!
//! The score of `(h, r, t)` is `Re(<e_h, r, conj(e_t)>)`, expanded as
//!
//! ```text
//! Σ  ReE_h·ReR·ReE_t + ImE_h·ReR·ImE_t + ReE_h·ImR·ImE_t − ImE_h·ImR·ReE_t
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Triple;
use crate::error::{KgError, NameKind, Result};

/// One of the four parameter blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    EntityRe,
    EntityIm,
    RelationRe,
    RelationIm,
}

impl Block {
    pub const ALL: [Block; 4] = [
        Block::EntityRe,
        Block::EntityIm,
        Block::RelationRe,
        Block::RelationIm,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    n: usize,
    m: usize,
    d: usize,
    pub re_e: Vec<f64>,
    pub im_e: Vec<f64>,
    pub re_r: Vec<f64>,
    pub im_r: Vec<f64>,
}

impl ModelParams {
    /// All-zero parameters.
    pub fn zeros(n: usize, m: usize, d: usize) -> Self {
        ModelParams {
            n,
            m,
            d,
            re_e: vec![0.0; n * d],
            im_e: vec![0.0; n * d],
            re_r: vec![0.0; m * d],
            im_r: vec![0.0; m * d],
        }
    }

    /// Builds parameters from explicit blocks, checking their lengths.
    pub fn from_blocks(
        d: usize,
        re_e: Vec<f64>,
        im_e: Vec<f64>,
        re_r: Vec<f64>,
        im_r: Vec<f64>,
    ) -> Result<Self> {
        if d == 0 || re_e.len() % d != 0 || re_r.len() % d != 0 {
            return Err(KgError::argument("block lengths are not multiples of d"));
        }
        if re_e.len() != im_e.len() || re_r.len() != im_r.len() {
            return Err(KgError::argument("real and imaginary blocks differ in size"));
        }
        Ok(ModelParams {
            n: re_e.len() / d,
            m: re_r.len() / d,
            d,
            re_e,
            im_e,
            re_r,
            im_r,
        })
    }

    /// Random initialization: entity components uniform in `[0, 1]`,
    /// relation components `N(0, 1/d)` (standard deviation `1/√d`).
    pub fn init(n: usize, m: usize, d: usize, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 || d == 0 {
            return Err(KgError::argument(format!(
                "embedding sizes must be positive (n={n}, m={m}, d={d})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(n, m, d);
        for x in params.re_e.iter_mut().chain(params.im_e.iter_mut()) {
            *x = rng.random::<f64>();
        }
        let normal = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("positive scale");
        for x in params.re_r.iter_mut().chain(params.im_r.iter_mut()) {
            *x = normal.sample(&mut rng);
        }
        Ok(params)
    }

    pub fn n_entities(&self) -> usize {
        self.n
    }

    pub fn n_relations(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn block(&self, block: Block) -> &[f64] {
        match block {
            Block::EntityRe => &self.re_e,
            Block::EntityIm => &self.im_e,
            Block::RelationRe => &self.re_r,
            Block::RelationIm => &self.im_r,
        }
    }

    pub fn block_mut(&mut self, block: Block) -> &mut [f64] {
        match block {
            Block::EntityRe => &mut self.re_e,
            Block::EntityIm => &mut self.im_e,
            Block::RelationRe => &mut self.re_r,
            Block::RelationIm => &mut self.im_r,
        }
    }

    fn rows(&self, i: usize) -> std::ops::Range<usize> {
        i * self.d..(i + 1) * self.d
    }

    pub fn entity_re(&self, i: usize) -> &[f64] {
        &self.re_e[self.rows(i)]
    }

    pub fn entity_im(&self, i: usize) -> &[f64] {
        &self.im_e[self.rows(i)]
    }

    pub fn relation_re(&self, k: usize) -> &[f64] {
        &self.re_r[self.rows(k)]
    }

    pub fn relation_im(&self, k: usize) -> &[f64] {
        &self.im_r[self.rows(k)]
    }

    pub fn check_entity(&self, id: usize) -> Result<()> {
        if id < self.n {
            Ok(())
        } else {
            Err(KgError::Index {
                kind: NameKind::Entity,
                id,
                size: self.n,
            })
        }
    }

    pub fn check_relation(&self, id: usize) -> Result<()> {
        if id < self.m {
            Ok(())
        } else {
            Err(KgError::Index {
                kind: NameKind::Relation,
                id,
                size: self.m,
            })
        }
    }

    pub fn check_triple(&self, t: &Triple) -> Result<()> {
        self.check_entity(t.head)?;
        self.check_relation(t.rel)?;
        self.check_entity(t.tail)
    }

    /// Triple score with bounds checking.
    pub fn score_triple(&self, t: &Triple) -> Result<f64> {
        self.check_triple(t)?;
        Ok(self.score(t.head, t.rel, t.tail))
    }

    /// Triple score; panics on out-of-range ids.
    pub fn score(&self, head: usize, rel: usize, tail: usize) -> f64 {
        let (hr, hi) = (self.entity_re(head), self.entity_im(head));
        let (tr, ti) = (self.entity_re(tail), self.entity_im(tail));
        let (rr, ri) = (self.relation_re(rel), self.relation_im(rel));
        let mut s = 0.0;
        for l in 0..self.d {
            s += hr[l] * rr[l] * tr[l] + hi[l] * rr[l] * ti[l] + hr[l] * ri[l] * ti[l]
                - hi[l] * ri[l] * tr[l];
        }
        s
    }

    /// Coefficients `(a_re, a_im)` with `score(h, r, t) = a_re·ReE_t + a_im·ImE_t`
    /// for every tail `t`. Also the score gradient with respect to the tail.
    pub fn tail_query(&self, head: usize, rel: usize) -> (Vec<f64>, Vec<f64>) {
        let (hr, hi) = (self.entity_re(head), self.entity_im(head));
        let (rr, ri) = (self.relation_re(rel), self.relation_im(rel));
        let a_re = (0..self.d).map(|l| hr[l] * rr[l] - hi[l] * ri[l]).collect();
        let a_im = (0..self.d).map(|l| hi[l] * rr[l] + hr[l] * ri[l]).collect();
        (a_re, a_im)
    }

    /// Coefficients `(b_re, b_im)` with `score(h, r, t) = b_re·ReE_h + b_im·ImE_h`
    /// for every head `h`. Also the score gradient with respect to the head.
    pub fn head_query(&self, rel: usize, tail: usize) -> (Vec<f64>, Vec<f64>) {
        let (tr, ti) = (self.entity_re(tail), self.entity_im(tail));
        let (rr, ri) = (self.relation_re(rel), self.relation_im(rel));
        let b_re = (0..self.d).map(|l| rr[l] * tr[l] + ri[l] * ti[l]).collect();
        let b_im = (0..self.d).map(|l| rr[l] * ti[l] - ri[l] * tr[l]).collect();
        (b_re, b_im)
    }

    /// Dot product of entity `e` with query coefficients.
    pub fn entity_dot(&self, e: usize, q_re: &[f64], q_im: &[f64]) -> f64 {
        let (er, ei) = (self.entity_re(e), self.entity_im(e));
        let mut s = 0.0;
        for l in 0..self.d {
            s += er[l] * q_re[l] + ei[l] * q_im[l];
        }
        s
    }

    /// Conjugate of relation `rel`, which represents its inverse:
    /// `score(h, r, t) == score(t, conj(r), h)`.
    pub fn inverse_relation_rep(&self, rel: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_relation(rel)?;
        Ok((
            self.relation_re(rel).to_vec(),
            self.relation_im(rel).iter().map(|x| -x).collect(),
        ))
    }

    /// Clamps every entity component into `[0, 1]`. Relations are untouched.
    pub fn project_entities(&mut self) {
        for x in self.re_e.iter_mut().chain(self.im_e.iter_mut()) {
            *x = x.clamp(0.0, 1.0);
        }
    }

    pub fn entities_in_box(&self) -> bool {
        self.re_e
            .iter()
            .chain(&self.im_e)
            .all(|x| (0.0..=1.0).contains(x))
    }

    /// Rounds every entry through `f32`, matching what a single-precision
    /// checkpoint stores.
    pub fn round_to_f32(&mut self) {
        for b in Block::ALL {
            for x in self.block_mut(b) {
                *x = *x as f32 as f64;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(h: (f64, f64), r: (f64, f64), t: (f64, f64)) -> ModelParams {
        ModelParams::from_blocks(1, vec![h.0, t.0], vec![h.1, t.1], vec![r.0], vec![r.1]).unwrap()
    }

    /// Re(h · r · conj(t)) written as plain complex multiplication.
    fn complex_oracle(h: (f64, f64), r: (f64, f64), t: (f64, f64)) -> f64 {
        let hr = (h.0 * r.0 - h.1 * r.1, h.0 * r.1 + h.1 * r.0);
        let conj_t = (t.0, -t.1);
        hr.0 * conj_t.0 - hr.1 * conj_t.1
    }

    #[test]
    fn zero_params_score_zero() {
        let p = ModelParams::zeros(3, 2, 5);
        assert_eq!(p.score_triple(&Triple::new(0, 1, 2)).unwrap(), 0.0);
    }

    #[test]
    fn scalar_score_matches_complex_product() {
        let (h, r, t) = ((0.5, 0.5), (0.3, 0.2), (1.0, 0.0));
        let expected = complex_oracle(h, r, t);
        assert!((expected - 0.05).abs() < 1e-15);
        let p = scalar(h, r, t);
        assert!((p.score(0, 0, 1) - expected).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_relation() {
        let p = scalar((1.0, 0.0), (0.0, 1.0), (1.0, 0.0));
        assert_eq!(p.score(0, 0, 1), 0.0);
        assert_eq!(p.score(1, 0, 0), 0.0);

        let (h, r, t) = ((1.0, 0.0), (0.0, 1.0), (0.0, 1.0));
        let p = scalar(h, r, t);
        assert_eq!(complex_oracle(h, r, t), 1.0);
        assert_eq!(complex_oracle(t, r, h), -1.0);
        assert_eq!(p.score(0, 0, 1), 1.0);
        assert_eq!(p.score(1, 0, 0), -1.0);
    }

    #[test]
    fn out_of_range_ids() {
        let p = ModelParams::zeros(2, 1, 3);
        assert!(matches!(
            p.score_triple(&Triple::new(0, 0, 2)),
            Err(KgError::Index { kind: NameKind::Entity, id: 2, .. })
        ));
        assert!(matches!(
            p.score_triple(&Triple::new(0, 1, 0)),
            Err(KgError::Index { kind: NameKind::Relation, .. })
        ));
        assert!(p.inverse_relation_rep(1).is_err());
    }

    #[test]
    fn conjugate_inverse() {
        let p = scalar((0.5, 0.5), (0.3, 0.2), (1.0, 0.0));
        let (re, im) = p.inverse_relation_rep(0).unwrap();
        assert_eq!((re[0], im[0]), (0.3, -0.2));

        let inv = scalar((1.0, 0.0), (re[0], im[0]), (0.5, 0.5));
        assert!((p.score(0, 0, 1) - 0.05).abs() < 1e-15);
        assert!((inv.score(0, 0, 1) - 0.05).abs() < 1e-15);

        let real = scalar((0.0, 0.0), (0.7, 0.0), (0.0, 0.0));
        let (re, im) = real.inverse_relation_rep(0).unwrap();
        assert_eq!(re, vec![0.7]);
        assert_eq!(im, vec![0.0]);
    }

    #[test]
    fn projection_clamps_entities_only() {
        let mut p = ModelParams::from_blocks(
            3,
            vec![1.3, -0.2, 0.42],
            vec![0.0, 1.0, 2.0],
            vec![-5.0, 5.0, 0.5],
            vec![1.3, -0.2, 0.0],
        )
        .unwrap();
        p.project_entities();
        assert_eq!(p.re_e, vec![1.0, 0.0, 0.42]);
        assert_eq!(p.im_e, vec![0.0, 1.0, 1.0]);
        assert_eq!(p.re_r, vec![-5.0, 5.0, 0.5]);
        assert_eq!(p.im_r, vec![1.3, -0.2, 0.0]);
    }

    #[test]
    fn init_contract() {
        let a = ModelParams::init(2, 1, 4, 7).unwrap();
        let b = ModelParams::init(2, 1, 4, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            (a.re_e.len(), a.im_e.len(), a.re_r.len(), a.im_r.len()),
            (8, 8, 4, 4)
        );
        assert!(a.entities_in_box());
        assert_ne!(a, ModelParams::init(2, 1, 4, 8).unwrap());
        assert!(ModelParams::init(0, 1, 4, 0).is_err());
        assert!(ModelParams::init(1, 0, 4, 0).is_err());
        assert!(ModelParams::init(1, 1, 0, 0).is_err());
    }

    #[test]
    fn relation_init_scale() {
        let d = 400;
        let p = ModelParams::init(1, 50, d, 3).unwrap();
        let var = p.re_r.iter().map(|x| x * x).sum::<f64>() / p.re_r.len() as f64;
        assert!((var * d as f64 - 1.0).abs() < 0.05, "var·d = {}", var * d as f64);
    }

    #[test]
    fn query_coefficients_match_score() {
        let p = ModelParams::init(5, 2, 6, 11).unwrap();
        let (a_re, a_im) = p.tail_query(3, 1);
        let (b_re, b_im) = p.head_query(1, 4);
        for e in 0..5 {
            assert!((p.entity_dot(e, &a_re, &a_im) - p.score(3, 1, e)).abs() < 1e-12);
            assert!((p.entity_dot(e, &b_re, &b_im) - p.score(e, 1, 4)).abs() < 1e-12);
        }
    }
}
