//! Mini-batch AdaGrad training with negative sampling and box projection.

use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Precision;
use crate::data::{build_known_index, Dataset, Entailment, KnownIndex, Triple};
use crate::error::{KgError, Result};
use crate::eval::evaluate;
use crate::model::{Block, ModelParams};
use crate::objective::{
    loss_and_gradient, L2Scope, LossBreakdown, ObjectiveWeights, RowGrad, SparseGrad,
    TrainingExample,
};

pub const ADAGRAD_EPSILON: f64 = 1e-8;

/// Training hyperparameters. Serialized as `key=value` lines using the
/// field names; `#` starts a comment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Embedding dimension `d`.
    pub dim: usize,
    /// L2 coefficient `η`.
    pub eta: f64,
    /// Negatives sampled per positive.
    pub neg_ratio: usize,
    /// Initial AdaGrad learning rate.
    pub lr: f64,
    /// Entailment penalty coefficient `μ`.
    pub mu: f64,
    pub n_batches: usize,
    /// Epochs (passes over the training set).
    pub max_iters: usize,
    pub grad_norm_cap: f64,
    pub seed: u64,
    /// Validation MRR is computed every this many epochs.
    pub eval_every: usize,
    /// Clamp entity components into [0, 1] after every step.
    pub project: bool,
    pub l2_scope: L2Scope,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            eta: 0.01,
            neg_ratio: 10,
            lr: 0.1,
            mu: 0.0,
            n_batches: 100,
            max_iters: 1000,
            grad_norm_cap: 1.0,
            seed: 0,
            eval_every: 50,
            project: true,
            l2_scope: L2Scope::Touched,
            precision: Precision::F32,
        }
    }
}

impl TrainConfig {
    pub fn wn18() -> Self {
        TrainConfig {
            dim: 200,
            eta: 0.03,
            neg_ratio: 10,
            lr: 1.0,
            mu: 10.0,
            ..Self::default()
        }
    }

    pub fn fb15k() -> Self {
        TrainConfig {
            dim: 200,
            eta: 0.01,
            neg_ratio: 10,
            lr: 0.5,
            mu: 1e-3,
            ..Self::default()
        }
    }

    pub fn db100k() -> Self {
        TrainConfig {
            dim: 150,
            eta: 0.03,
            neg_ratio: 10,
            lr: 0.1,
            mu: 1e-5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("neg_ratio", self.neg_ratio),
            ("n_batches", self.n_batches),
            ("max_iters", self.max_iters),
            ("eval_every", self.eval_every),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(KgError::argument(format!("{name} must be at least 1")));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(KgError::argument(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.grad_norm_cap > 0.0) {
            return Err(KgError::argument("grad_norm_cap must be positive"));
        }
        for (name, v) in [("mu", self.mu), ("eta", self.eta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(KgError::argument(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn weights(&self) -> ObjectiveWeights {
        ObjectiveWeights {
            mu: self.mu,
            eta: self.eta,
            l2_scope: self.l2_scope,
        }
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dim={}", self.dim);
        let _ = writeln!(s, "eta={}", self.eta);
        let _ = writeln!(s, "neg_ratio={}", self.neg_ratio);
        let _ = writeln!(s, "lr={}", self.lr);
        let _ = writeln!(s, "mu={}", self.mu);
        let _ = writeln!(s, "n_batches={}", self.n_batches);
        let _ = writeln!(s, "max_iters={}", self.max_iters);
        let _ = writeln!(s, "grad_norm_cap={}", self.grad_norm_cap);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "eval_every={}", self.eval_every);
        let _ = writeln!(s, "project={}", self.project);
        let scope = match self.l2_scope {
            L2Scope::Touched => "touched",
            L2Scope::Full => "full",
        };
        let _ = writeln!(s, "l2_scope={scope}");
        let _ = writeln!(s, "precision={}", self.precision.bits());
        s
    }

    /// Applies `key=value` lines on top of `self`.
    pub fn merge_kv(mut self, text: &str, origin: &Path) -> Result<Self> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| KgError::Parse {
                path: origin.to_owned(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || err(format!("bad value `{value}` for `{key}`"));
            macro_rules! parse {
                () => {
                    value.parse().map_err(|_| bad())?
                };
            }
            match key {
                "dim" => self.dim = parse!(),
                "eta" => self.eta = parse!(),
                "neg_ratio" => self.neg_ratio = parse!(),
                "lr" => self.lr = parse!(),
                "mu" => self.mu = parse!(),
                "n_batches" => self.n_batches = parse!(),
                "max_iters" => self.max_iters = parse!(),
                "grad_norm_cap" => self.grad_norm_cap = parse!(),
                "seed" => self.seed = parse!(),
                "eval_every" => self.eval_every = parse!(),
                "project" => self.project = parse!(),
                "l2_scope" => {
                    self.l2_scope = match value {
                        "touched" => L2Scope::Touched,
                        "full" => L2Scope::Full,
                        _ => return Err(bad()),
                    }
                }
                "precision" => {
                    self.precision = Precision::from_bits(parse!()).ok_or_else(bad)?;
                }
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        Ok(self)
    }

    pub fn from_kv(text: &str, origin: &Path) -> Result<Self> {
        let config = Self::default().merge_kv(text, origin)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KgError::io(path, e))?;
        Self::from_kv(&text, path)
    }
}

/// Corrupts the head or the tail of `positive` (side chosen uniformly per
/// sample) with a uniformly drawn, different entity.
pub fn sample_negatives<R: Rng + ?Sized>(
    positive: Triple,
    k: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<TrainingExample>> {
    if n < 2 {
        return Err(KgError::argument(format!(
            "need at least 2 entities to corrupt a triple, have {n}"
        )));
    }
    Ok((0..k)
        .map(|_| {
            let corrupt_head = rng.random_bool(0.5);
            let original = if corrupt_head { positive.head } else { positive.tail };
            let replacement = loop {
                let e = rng.random_range(0..n);
                if e != original {
                    break e;
                }
            };
            let mut t = positive;
            if corrupt_head {
                t.head = replacement;
            } else {
                t.tail = replacement;
            }
            TrainingExample::negative(t)
        })
        .collect())
}

/// Shuffles `train` and splits it into `n_batches` parts whose sizes differ
/// by at most one.
pub fn make_batches<R: Rng + ?Sized>(
    train: &[Triple],
    n_batches: usize,
    rng: &mut R,
) -> Vec<Vec<Triple>> {
    let n_batches = n_batches.max(1);
    if n_batches > train.len() {
        warn!(
            "{n_batches} batches for {} triples, some batches will be empty",
            train.len()
        );
    }
    let mut shuffled = train.to_vec();
    shuffled.shuffle(rng);
    let base = shuffled.len() / n_batches;
    let extra = shuffled.len() % n_batches;
    let mut rest = shuffled.as_slice();
    (0..n_batches)
        .map(|b| {
            let size = base + usize::from(b < extra);
            let (batch, tail) = rest.split_at(size);
            rest = tail;
            batch.to_vec()
        })
        .collect()
}

/// Per-entry AdaGrad accumulators, one per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGradState {
    accum: [Vec<f64>; 4],
    d: usize,
    pub epsilon: f64,
}

impl AdaGradState {
    pub fn new(params: &ModelParams) -> Self {
        AdaGradState {
            accum: Block::ALL.map(|b| vec![0.0; params.block(b).len()]),
            d: params.dim(),
            epsilon: ADAGRAD_EPSILON,
        }
    }

    pub fn accumulator(&self, block: Block) -> &[f64] {
        &self.accum[block as usize]
    }
}

fn apply_rows(
    params: &mut ModelParams,
    state: &mut AdaGradState,
    rows: &std::collections::BTreeMap<usize, RowGrad>,
    blocks: (Block, Block),
    lr: f64,
) {
    let d = state.d;
    let eps = state.epsilon;
    for (&i, g) in rows {
        for (block, grad) in [(blocks.0, &g.re), (blocks.1, &g.im)] {
            let acc = &mut state.accum[block as usize][i * d..(i + 1) * d];
            let x = &mut params.block_mut(block)[i * d..(i + 1) * d];
            for l in 0..d {
                let gl = grad[l];
                if gl == 0.0 {
                    continue;
                }
                acc[l] += gl * gl;
                x[l] -= lr * gl / (acc[l].sqrt() + eps);
            }
        }
    }
}

/// One AdaGrad update over the touched entries:
/// `accum += g²; x −= lr·g / (√accum + ε)`.
pub fn adagrad_step(params: &mut ModelParams, grads: &SparseGrad, state: &mut AdaGradState, lr: f64) {
    debug_assert_eq!(grads.dim(), params.dim());
    apply_rows(params, state, &grads.entities, (Block::EntityRe, Block::EntityIm), lr);
    apply_rows(params, state, &grads.relations, (Block::RelationRe, Block::RelationIm), lr);
}

/// Summed loss terms of one epoch, plus validation MRR when computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub valid_mrr: Option<f64>,
}

pub const LOG_HEADER: &str = "epoch,logistic,penalty,l2,total,valid_mrr";

pub fn format_log_csv(log: &[EpochLog]) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for e in log {
        let _ = write!(
            s,
            "{},{},{},{},{},",
            e.epoch, e.loss.logistic, e.loss.entailment_penalty, e.loss.l2, e.loss.total
        );
        if let Some(mrr) = e.valid_mrr {
            let _ = write!(s, "{mrr}");
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation parameters (final ones when there is no valid split).
    pub params: ModelParams,
    pub best_epoch: usize,
    pub best_valid_mrr: Option<f64>,
    pub log: Vec<EpochLog>,
}

/// Stateful training loop over a fixed dataset and entailment set.
pub struct Trainer<'a> {
    dataset: &'a Dataset,
    ents: &'a [Entailment],
    config: TrainConfig,
    known: KnownIndex,
    params: ModelParams,
    adagrad: AdaGradState,
    rng: ChaCha8Rng,
    epoch: usize,
    best: Option<(f64, usize, ModelParams)>,
    log: Vec<EpochLog>,
}

impl<'a> Trainer<'a> {
    pub fn new(dataset: &'a Dataset, ents: &'a [Entailment], config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let n = dataset.vocab.n_entities();
        let m = dataset.vocab.n_relations();
        for e in ents {
            if e.premise >= m || e.conclusion >= m {
                return Err(KgError::argument(format!(
                    "entailment refers to relation outside 0..{m}"
                )));
            }
        }
        let params = ModelParams::init(n, m, config.dim, config.seed)?;
        let adagrad = AdaGradState::new(&params);
        // separate stream from the initializer
        let rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
        Ok(Trainer {
            dataset,
            ents,
            known: build_known_index(dataset),
            params,
            adagrad,
            rng,
            epoch: 0,
            best: None,
            log: Vec::new(),
            config,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// One optimizer step on a batch of positives.
    pub fn step(&mut self, batch: &[Triple]) -> Result<LossBreakdown> {
        let n = self.params.n_entities();
        let mut examples = Vec::with_capacity(batch.len() * (1 + self.config.neg_ratio));
        for &pos in batch {
            examples.push(TrainingExample::positive(pos));
            examples.extend(sample_negatives(pos, self.config.neg_ratio, n, &mut self.rng)?);
        }
        let (loss, mut grad) =
            loss_and_gradient(&self.params, &examples, self.ents, &self.config.weights());
        if !loss.total.is_finite() || !grad.is_finite() {
            return Err(KgError::NonFinite {
                epoch: self.epoch,
                batch: 0,
            });
        }
        grad.clip_norm(self.config.grad_norm_cap);
        adagrad_step(&mut self.params, &grad, &mut self.adagrad, self.config.lr);
        if self.config.project {
            self.params.project_entities();
        }
        Ok(loss)
    }

    /// One pass over the training set. `on_step` sees the parameters after
    /// every update (and projection).
    pub fn run_epoch_observed(
        &mut self,
        mut on_step: impl FnMut(&ModelParams),
    ) -> Result<EpochLog> {
        let batches = make_batches(&self.dataset.train, self.config.n_batches, &mut self.rng);
        let mut total = LossBreakdown::default();
        for (b, batch) in batches.iter().enumerate() {
            let loss = self.step(batch).map_err(|e| match e {
                KgError::NonFinite { epoch, .. } => KgError::NonFinite { epoch, batch: b },
                other => other,
            })?;
            total += loss;
            on_step(&self.params);
        }
        self.epoch += 1;

        let due = self.epoch % self.config.eval_every == 0 || self.epoch == self.config.max_iters;
        let valid_mrr = if due && !self.dataset.valid.is_empty() {
            let mrr = evaluate(&self.params, &self.dataset.valid, &self.known)?.mrr;
            info!("epoch {}: loss {:.4}, valid MRR {mrr:.4}", self.epoch, total.total);
            if self.best.as_ref().is_none_or(|(best, _, _)| mrr > *best) {
                self.best = Some((mrr, self.epoch, self.params.clone()));
            }
            Some(mrr)
        } else {
            None
        };
        let entry = EpochLog {
            epoch: self.epoch,
            loss: total,
            valid_mrr,
        };
        self.log.push(entry);
        Ok(entry)
    }

    pub fn run_epoch(&mut self) -> Result<EpochLog> {
        self.run_epoch_observed(|_| {})
    }

    /// Runs the remaining epochs up to `max_iters` and returns the best
    /// checkpoint by validation MRR.
    pub fn train(mut self) -> Result<TrainOutcome> {
        while self.epoch < self.config.max_iters {
            self.run_epoch()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> TrainOutcome {
        match self.best {
            Some((mrr, epoch, params)) => TrainOutcome {
                params,
                best_epoch: epoch,
                best_valid_mrr: Some(mrr),
                log: self.log,
            },
            None => TrainOutcome {
                params: self.params,
                best_epoch: self.epoch,
                best_valid_mrr: None,
                log: self.log,
            },
        }
    }
}

/// Trains from scratch with `config`.
pub fn train(dataset: &Dataset, ents: &[Entailment], config: &TrainConfig) -> Result<TrainOutcome> {
    Trainer::new(dataset, ents, config.clone())?.train()
}
