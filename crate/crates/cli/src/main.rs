//! `kgec`: mine rules, train, evaluate and inspect constrained ComplEx
//! models.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod analyze;
mod eval;
mod grid;
mod manifest;
mod mine;
mod significance;
mod train;

#[derive(Parser)]
#[command(name = "kgec", version, about = "Knowledge graph embeddings with non-negativity and entailment constraints")]
struct Cli {
    /// Worker threads for evaluation and analysis.
    #[arg(long, global = true, env = "KGEC_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract length-1 entailments from a training split.
    Mine(mine::MineArgs),
    /// Train a model (or sweep hyperparameters with --grid).
    Train(train::TrainArgs),
    /// Filtered link-prediction metrics and per-triple ranks.
    Eval(eval::EvalArgs),
    /// Purity curves, heatmaps and relation-pair diagnostics.
    Analyze(analyze::AnalyzeArgs),
    /// Paired t-tests between two rank dumps.
    Significance(significance::SignificanceArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.workers {
        anyhow::ensure!(n > 0, "--workers must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Mine(args) => mine::run(args),
        Command::Train(args) => train::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Analyze(args) => analyze::run(args),
        Command::Significance(args) => significance::run(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
