use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use kgec_core::analysis::{
    heatmap_csv, purity_csv, purity_curve, relation_pair_diagnostic, rule_diagnostic,
    sample_entities_by_type, MatrixView, Part, PairReport, TypeLabels,
};
use kgec_core::checkpoint;
use kgec_core::data::{load_entailments, INVERSE_SUFFIX};
use kgec_core::miner::{classify_entailments, PairClass, DEFAULT_MIN_CONFIDENCE};
use kgec_core::{ModelParams, Vocab};

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// entity<TAB>type file for purity and heatmaps.
    #[arg(long)]
    types: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Entailment TSV; enables relation-pair diagnostics.
    #[arg(long)]
    ents: Option<PathBuf>,
    /// K values (percent of labelled entities) for the purity curve.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    k: Vec<f64>,
    /// Entities per type in the heatmaps.
    #[arg(long, default_value_t = 5)]
    per_type: usize,
    /// Confidence both directions must exceed to count as equivalence or
    /// inversion.
    #[arg(long, default_value_t = DEFAULT_MIN_CONFIDENCE)]
    pair_thresh: f64,
    /// Seed for the heatmap entity sample.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

const PARTS: [Part; 2] = [Part::Real, Part::Imaginary];

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn pair_rows(params: &ModelParams, vocab: &Vocab, ents_path: &Path, thresh: f64) -> anyhow::Result<String> {
    let ents = load_entailments(ents_path, vocab)?;
    let classes = classify_entailments(&ents, thresh);
    let mut csv = String::from("class,premise,conclusion,residual,imag_gap\n");
    let mut row = |p: String, q: usize, r: PairReport| {
        let gap = r.imag_gap.map(|g| g.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{},{p},{},{},{gap}", r.class.as_str(), vocab.relation_name(q), r.residual);
    };
    for (class, pairs) in [
        (PairClass::Equivalence, &classes.equivalence),
        (PairClass::Inversion, &classes.inversion),
    ] {
        for &(p, q) in pairs {
            let report = relation_pair_diagnostic(params, p, q, class)?;
            row(vocab.relation_name(p).to_owned(), q, report);
        }
    }
    for e in &classes.others {
        let suffix = if e.premise_inverted { INVERSE_SUFFIX } else { "" };
        let report = rule_diagnostic(params, e)?;
        row(format!("{}{suffix}", vocab.relation_name(e.premise)), e.conclusion, report);
    }
    Ok(csv)
}

pub fn run(args: AnalyzeArgs) -> anyhow::Result<()> {
    let (params, _) = checkpoint::load(&args.checkpoint)?;
    let vocab = checkpoint::load_vocab(&args.checkpoint)?;
    let labels = TypeLabels::load(&args.types, &vocab)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let curves = PARTS
        .iter()
        .map(|&part| purity_curve(MatrixView::entities(&params, part), &labels, &args.k))
        .collect::<Result<Vec<_>, _>>()?;
    let named: Vec<(&str, _)> = PARTS.iter().map(|p| p.as_str()).zip(&curves).collect();
    write(&args.out.join("purity.csv"), &purity_csv(&named))?;

    let sample = sample_entities_by_type(&labels, args.per_type, args.seed);
    for part in PARTS {
        let csv = heatmap_csv(MatrixView::entities(&params, part), &sample, &vocab, &labels)?;
        write(&args.out.join(format!("heatmap_{}.csv", part.as_str())), &csv)?;
    }

    if let Some(ents) = &args.ents {
        let csv = pair_rows(&params, &vocab, ents, args.pair_thresh)?;
        write(&args.out.join("relation_pairs.csv"), &csv)?;
    }

    for (part, curve) in named {
        if let Some((k, h)) = curve.points.first() {
            println!("{part}: mean entropy {h:.4} nats at K={k}%");
        }
    }
    Ok(())
}
