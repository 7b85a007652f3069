use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use kgec_core::eval::{compare_runs, read_rank_dump, SIGNIFICANCE_LEVEL};

#[derive(Args, Debug)]
pub struct SignificanceArgs {
    /// ranks.csv from the first run.
    a: PathBuf,
    /// ranks.csv from the second run, over the same triples in the same order.
    b: PathBuf,
    /// Also write the table to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: SignificanceArgs) -> anyhow::Result<()> {
    let a = read_rank_dump(&args.a)?;
    let b = read_rank_dump(&args.b)?;
    let rows = compare_runs(&a, &b)?;
    let mut csv = String::from("metric,a,b,p_value,significant\n");
    for (metric, va, vb, p) in &rows {
        let _ = writeln!(csv, "{metric},{va},{vb},{p},{}", *p < SIGNIFICANCE_LEVEL);
    }
    if let Some(out) = &args.out {
        fs::write(out, &csv).with_context(|| format!("writing {}", out.display()))?;
    }
    print!("{csv}");
    Ok(())
}
