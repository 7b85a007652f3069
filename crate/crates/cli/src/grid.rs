//! Two-stage hyperparameter sweep. Stage one tunes plain ComplEx over
//! `dim × eta × neg_ratio × lr`; stage two fixes the winner, turns on
//! projection and tunes `mu`. Runs go to `<out>/grid/<id>/` and are skipped
//! on restart when their manifest is complete and matches.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use kgec_core::data::{Dataset, Entailment};
use kgec_core::TrainConfig;
use log::info;

use crate::manifest::{config_map, RunManifest, Status, MANIFEST_FILE};
use crate::train::train_into;

#[derive(Debug, Clone, PartialEq)]
pub struct Axes {
    pub dim: Vec<usize>,
    pub eta: Vec<f64>,
    pub neg_ratio: Vec<usize>,
    pub lr: Vec<f64>,
    pub mu: Vec<f64>,
}

impl Default for Axes {
    fn default() -> Self {
        Axes {
            dim: vec![100, 150, 200],
            eta: vec![0.001, 0.003, 0.01, 0.03, 0.1],
            neg_ratio: vec![2, 10],
            lr: vec![0.01, 0.05, 0.1, 0.5, 1.0],
            mu: vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4, 1e5],
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, values: &str) -> anyhow::Result<Vec<T>> {
    let parsed = values
        .split(',')
        .map(|v| v.trim().parse::<T>().ok())
        .collect::<Option<Vec<T>>>()
        .with_context(|| format!("bad value list `{values}` for grid axis `{key}`"))?;
    if parsed.is_empty() {
        bail!("grid axis `{key}` is empty");
    }
    Ok(parsed)
}

impl Axes {
    pub fn from_overrides(overrides: &[String]) -> anyhow::Result<Self> {
        let mut axes = Axes::default();
        for o in overrides {
            let (key, values) = o
                .split_once('=')
                .with_context(|| format!("expected KEY=V1,V2,..., found `{o}`"))?;
            match key.trim() {
                "dim" => axes.dim = parse_list(key, values)?,
                "eta" => axes.eta = parse_list(key, values)?,
                "neg_ratio" => axes.neg_ratio = parse_list(key, values)?,
                "lr" => axes.lr = parse_list(key, values)?,
                "mu" => axes.mu = parse_list(key, values)?,
                other => bail!("unknown grid axis `{other}`"),
            }
        }
        Ok(axes)
    }

    fn first_stage(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &dim in &self.dim {
            for &eta in &self.eta {
                for &neg_ratio in &self.neg_ratio {
                    for &lr in &self.lr {
                        out.push(TrainConfig {
                            dim,
                            eta,
                            neg_ratio,
                            lr,
                            mu: 0.0,
                            project: false,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }

    fn second_stage(&self, best: &TrainConfig) -> Vec<TrainConfig> {
        self.mu
            .iter()
            .map(|&mu| TrainConfig {
                mu,
                project: true,
                ..best.clone()
            })
            .collect()
    }
}

struct Outcome {
    id: String,
    config: TrainConfig,
    valid_mrr: f64,
    best_epoch: usize,
}

/// A previous run in `dir` that can stand in for training `config` again.
fn reusable(dir: &Path, config: &TrainConfig) -> Option<RunManifest> {
    let manifest = RunManifest::read(&dir.join(MANIFEST_FILE)).ok()?;
    let ok = manifest.status == Status::Complete
        && manifest.config == config_map(config)
        && manifest.best_valid_mrr.is_some()
        && manifest.verify_inputs().is_ok();
    ok.then_some(manifest)
}

#[allow(clippy::too_many_arguments)]
fn run_stage(
    stage: &str,
    configs: Vec<TrainConfig>,
    data: &Path,
    ents_path: Option<&Path>,
    dataset: &Dataset,
    ents: &[Entailment],
    out: &Path,
    results: &mut Vec<Outcome>,
) -> anyhow::Result<usize> {
    let start = results.len();
    let total = configs.len();
    for (i, config) in configs.into_iter().enumerate() {
        let id = format!("{stage}-{i:03}");
        let dir = out.join("grid").join(&id);
        let manifest = match reusable(&dir, &config) {
            Some(m) => {
                info!("{id}: reusing finished run");
                m
            }
            None => {
                info!("{id} ({}/{total}): training", i + 1);
                train_into(data, ents_path, dataset, ents, &config, &dir)?
            }
        };
        let valid_mrr = manifest.best_valid_mrr.context("grid run without validation MRR")?;
        println!("{id}: valid MRR {valid_mrr:.4}");
        results.push(Outcome {
            id,
            config,
            valid_mrr,
            best_epoch: manifest.best_epoch.unwrap_or(0),
        });
    }
    // first maximum wins ties
    let best = (start..results.len())
        .reduce(|a, b| if results[b].valid_mrr > results[a].valid_mrr { b } else { a })
        .context("empty grid stage")?;
    Ok(best)
}

pub fn run(
    data: &Path,
    ents_path: Option<&Path>,
    dataset: &Dataset,
    ents: &[Entailment],
    base: &TrainConfig,
    axes: &Axes,
    out: &Path,
) -> anyhow::Result<()> {
    if dataset.valid.is_empty() {
        bail!("--grid selects by validation MRR but {} has no valid.txt triples", data.display());
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut results = Vec::new();
    let mut best = run_stage("complex", axes.first_stage(base), data, ents_path, dataset, ents, out, &mut results)?;
    if ents.is_empty() {
        log::warn!("no entailments given, skipping the mu stage");
    } else {
        let stage_one = results[best].config.clone();
        best = run_stage("mu", axes.second_stage(&stage_one), data, ents_path, dataset, ents, out, &mut results)?;
    }

    let mut csv = String::from("run,dim,eta,neg_ratio,lr,mu,project,valid_mrr,best_epoch\n");
    for r in &results {
        let c = &r.config;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.id, c.dim, c.eta, c.neg_ratio, c.lr, c.mu, c.project, r.valid_mrr, r.best_epoch
        );
    }
    let csv_path = out.join("grid_results.csv");
    fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;
    let best_cfg = out.join("best.cfg");
    let winner = &results[best];
    fs::write(&best_cfg, winner.config.to_kv_string())
        .with_context(|| format!("writing {}", best_cfg.display()))?;
    println!(
        "best: {} (valid MRR {:.4}), checkpoint {}",
        winner.id,
        winner.valid_mrr,
        out.join("grid").join(&winner.id).join(crate::train::CHECKPOINT_FILE).display()
    );
    Ok(())
}
