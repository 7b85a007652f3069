use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use kgec_core::checkpoint::{self, Precision};
use kgec_core::data::{load_entailments, Dataset, Entailment};
use kgec_core::train::{format_log_csv, train};
use kgec_core::TrainConfig;
use log::warn;

use crate::grid;
use crate::manifest::{RunManifest, Status, MANIFEST_FILE};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory holding train.txt, valid.txt and test.txt.
    #[arg(long, required_unless_present = "manifest")]
    data: Option<PathBuf>,
    /// Entailment TSV (premise[^-1] <TAB> conclusion <TAB> confidence).
    #[arg(long)]
    ents: Option<PathBuf>,
    /// key=value hyperparameter file; unspecified keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Entailment penalty weight; 0 disables the rules.
    #[arg(long)]
    mu: Option<f64>,
    /// Leave entity embeddings unconstrained (plain ComplEx with --mu 0).
    #[arg(long)]
    no_projection: bool,
    /// Checkpoint float width, 32 or 64.
    #[arg(long)]
    precision: Option<u64>,
    /// Extra key=value overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Sweep the hyperparameter grid and keep the best run by validation MRR.
    #[arg(long, conflicts_with = "manifest")]
    grid: bool,
    /// Replace one grid axis, e.g. `dim=100,200`.
    #[arg(long = "grid-axis", value_name = "KEY=V1,V2,...", requires = "grid")]
    grid_axes: Vec<String>,
    /// Rerun a recorded run from its manifest.json; inputs must be unchanged.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

pub const CHECKPOINT_FILE: &str = "model.kgec";
pub const ENTITIES_FILE: &str = "entities.txt";
pub const RELATIONS_FILE: &str = "relations.txt";
pub const LOG_FILE: &str = "train_log.csv";
pub const CONFIG_FILE: &str = "config.cfg";

fn build_config(args: &TrainArgs) -> anyhow::Result<TrainConfig> {
    let mut config = match &args.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(mu) = args.mu {
        config.mu = mu;
    }
    if args.no_projection {
        config.project = false;
    }
    if let Some(bits) = args.precision {
        config.precision = Precision::from_bits(bits)
            .with_context(|| format!("--precision must be 32 or 64, got {bits}"))?;
    }
    let text = args.overrides.join("\n");
    let config = config.merge_kv(&text, Path::new("--set"))?;
    config.validate()?;
    Ok(config)
}

pub fn load_inputs(data: &Path, ents: Option<&Path>) -> anyhow::Result<(Dataset, Vec<Entailment>)> {
    let dataset = Dataset::load_dir(data)?;
    let ents = match ents {
        Some(path) => load_entailments(path, &dataset.vocab)?,
        None => Vec::new(),
    };
    Ok((dataset, ents))
}

/// Trains one model into `out`. The manifest is written before training
/// starts and rewritten with the results at the end.
pub fn train_into(
    data: &Path,
    ents_path: Option<&Path>,
    dataset: &Dataset,
    ents: &[Entailment],
    config: &TrainConfig,
    out: &Path,
) -> anyhow::Result<RunManifest> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    if config.mu > 0.0 && ents.is_empty() {
        warn!("mu = {} but no entailments were given", config.mu);
    }
    let manifest_path = out.join(MANIFEST_FILE);
    let mut manifest = RunManifest::new(data, ents_path, config)?;
    for (key, file) in [
        ("checkpoint", CHECKPOINT_FILE),
        ("entities", ENTITIES_FILE),
        ("relations", RELATIONS_FILE),
        ("log", LOG_FILE),
        ("config", CONFIG_FILE),
    ] {
        manifest.outputs.insert(key.to_owned(), out.join(file));
    }
    manifest
        .outputs
        .insert("vocab_sidecar".to_owned(), checkpoint::sidecar_path(&out.join(CHECKPOINT_FILE)));
    manifest.write(&manifest_path)?;

    let config_path = out.join(CONFIG_FILE);
    fs::write(&config_path, config.to_kv_string())
        .with_context(|| format!("writing {}", config_path.display()))?;

    let outcome = train(dataset, ents, config)?;

    let ckpt = out.join(CHECKPOINT_FILE);
    checkpoint::save(&ckpt, &outcome.params, config.precision)?;
    checkpoint::save_vocab(&ckpt, &dataset.vocab, &out.join(ENTITIES_FILE), &out.join(RELATIONS_FILE))?;
    let log_path = out.join(LOG_FILE);
    fs::write(&log_path, format_log_csv(&outcome.log))
        .with_context(|| format!("writing {}", log_path.display()))?;

    manifest.status = Status::Complete;
    manifest.best_epoch = Some(outcome.best_epoch);
    manifest.best_valid_mrr = outcome.best_valid_mrr;
    manifest.write(&manifest_path)?;
    Ok(manifest)
}

fn replay(path: &Path, out: &Path) -> anyhow::Result<()> {
    let recorded = RunManifest::read(path)?;
    recorded.verify_inputs()?;
    if recorded.version != env!("CARGO_PKG_VERSION") {
        warn!(
            "manifest was written by version {}, running {}",
            recorded.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    let config = recorded.train_config()?;
    let ents = recorded.entailments.as_deref();
    let (dataset, rules) = load_inputs(&recorded.data_dir, ents)?;
    let manifest = train_into(&recorded.data_dir, ents, &dataset, &rules, &config, out)?;
    report(&manifest, out);
    Ok(())
}

fn report(manifest: &RunManifest, out: &Path) {
    match (manifest.best_valid_mrr, manifest.best_epoch) {
        (Some(mrr), Some(epoch)) => println!("best valid MRR {mrr:.4} at epoch {epoch}"),
        (_, Some(epoch)) => println!("trained {epoch} epochs (no validation split)"),
        _ => {}
    }
    println!("wrote {}", out.join(CHECKPOINT_FILE).display());
}

pub fn run(args: TrainArgs) -> anyhow::Result<()> {
    if let Some(path) = &args.manifest {
        if args.data.is_some() || args.config.is_some() || !args.overrides.is_empty() {
            bail!("--manifest replays a recorded run and takes no other inputs besides --out");
        }
        return replay(path, &args.out);
    }
    let config = build_config(&args)?;
    let data = args.data.as_deref().expect("required by clap");
    let (dataset, ents) = load_inputs(data, args.ents.as_deref())?;
    if args.grid {
        let axes = grid::Axes::from_overrides(&args.grid_axes)?;
        return grid::run(data, args.ents.as_deref(), &dataset, &ents, &config, &axes, &args.out);
    }
    let manifest = train_into(data, args.ents.as_deref(), &dataset, &ents, &config, &args.out)?;
    report(&manifest, &args.out);
    Ok(())
}
