use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use kgec_core::checkpoint;
use kgec_core::data::{build_known_index, Dataset};
use kgec_core::eval::{evaluate_with, rank_records, write_rank_dump, Setting, HITS_AT};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Split {
    Valid,
    Test,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory holding train.txt, valid.txt and test.txt.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint written by `train`; its `.vocab` sidecar must sit next to it.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output directory; gets metrics.csv and ranks.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: Split,
    /// Rank against every corruption, including known true triples.
    #[arg(long)]
    raw: bool,
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const RANKS_FILE: &str = "ranks.csv";

pub fn run(args: EvalArgs) -> anyhow::Result<()> {
    let (params, _) = checkpoint::load(&args.checkpoint)?;
    let vocab = checkpoint::load_vocab(&args.checkpoint)?;
    anyhow::ensure!(
        (vocab.n_entities(), vocab.n_relations()) == (params.n_entities(), params.n_relations()),
        "{} holds {}×{} embeddings but its vocabulary has {} entities and {} relations",
        args.checkpoint.display(),
        params.n_entities(),
        params.n_relations(),
        vocab.n_entities(),
        vocab.n_relations()
    );
    let dataset = Dataset::load_dir_with_vocab(&args.data, vocab)?;
    let triples = match args.split {
        Split::Valid => &dataset.valid,
        Split::Test => &dataset.test,
    };
    let setting = if args.raw { Setting::Raw } else { Setting::Filtered };
    let known = build_known_index(&dataset);
    let result = evaluate_with(&params, triples, &known, setting)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut metrics = String::from("metric,value\n");
    let _ = writeln!(metrics, "mrr,{}", result.mrr);
    for n in HITS_AT {
        let _ = writeln!(metrics, "hits@{n},{}", result.hits_at(n));
    }
    let _ = writeln!(metrics, "triples,{}", triples.len());
    let metrics_path = args.out.join(METRICS_FILE);
    fs::write(&metrics_path, &metrics).with_context(|| format!("writing {}", metrics_path.display()))?;
    write_rank_dump(&args.out.join(RANKS_FILE), &rank_records(triples, &result, &dataset.vocab))?;

    print!("{metrics}");
    Ok(())
}
