use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use kgec_core::data::{write_entailments, Dataset};
use kgec_core::miner::{
    classify_pairs, diagnostics_csv, entailments, mine_entailments, DEFAULT_MIN_CONFIDENCE,
    DEFAULT_MIN_SUPPORT,
};

#[derive(Args, Debug)]
pub struct MineArgs {
    /// Directory holding train.txt (valid/test are not used).
    #[arg(long)]
    data: PathBuf,
    /// Output directory; gets entailments.tsv and mining_diagnostics.csv.
    #[arg(long)]
    out: PathBuf,
    /// Keep rules with PCA confidence strictly above this.
    #[arg(long, default_value_t = DEFAULT_MIN_CONFIDENCE)]
    min_conf: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_SUPPORT)]
    min_support: usize,
}

pub const ENTAILMENTS_FILE: &str = "entailments.tsv";
pub const DIAGNOSTICS_FILE: &str = "mining_diagnostics.csv";

pub fn run(args: MineArgs) -> anyhow::Result<()> {
    let dataset = Dataset::load_dir(&args.data)?;
    let rules = mine_entailments(&dataset.train, args.min_conf, args.min_support)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let tsv = args.out.join(ENTAILMENTS_FILE);
    write_entailments(&tsv, &entailments(&rules), &dataset.vocab)?;
    let diag = args.out.join(DIAGNOSTICS_FILE);
    fs::write(&diag, diagnostics_csv(&rules, &dataset.vocab))
        .with_context(|| format!("writing {}", diag.display()))?;

    let classes = classify_pairs(&rules, args.min_conf);
    println!(
        "{} rules ({} inverted premise); {} equivalence pairs, {} inversion pairs, {} others",
        rules.len(),
        rules.iter().filter(|r| r.entailment.premise_inverted).count(),
        classes.equivalence.len(),
        classes.inversion.len(),
        classes.others.len()
    );
    println!("wrote {}", tsv.display());
    Ok(())
}
