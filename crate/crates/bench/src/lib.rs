//! Fixtures shared by the benchmarks in `benches/`.

use kgec_core::data::{Dataset, Entailment, Triple};
use kgec_core::objective::TrainingExample;
use kgec_core::synthetic::random_kg;
use kgec_core::ModelParams;

/// A random graph sized like a small benchmark split.
pub fn graph(n: usize, m: usize, train: usize, test: usize) -> Dataset {
    random_kg(n, m, [train, 0, test], 11)
}

pub fn params(dataset: &Dataset, d: usize) -> ModelParams {
    ModelParams::init(dataset.vocab.n_entities(), dataset.vocab.n_relations(), d, 3).expect("non-empty graph")
}

/// `batch` positives, each followed by `neg_ratio` corrupted tails.
pub fn examples(train: &[Triple], n: usize, batch: usize, neg_ratio: usize) -> Vec<TrainingExample> {
    let mut out = Vec::with_capacity(batch * (1 + neg_ratio));
    for (i, &t) in train.iter().take(batch).enumerate() {
        out.push(TrainingExample::positive(t));
        for k in 1..=neg_ratio {
            let tail = (t.tail + i + k) % n;
            out.push(TrainingExample::negative(Triple::new(t.head, t.rel, tail)));
        }
    }
    out
}

/// One rule per consecutive relation pair, alternating inverted premises.
pub fn rules(m: usize) -> Vec<Entailment> {
    (0..m.saturating_sub(1))
        .map(|r| Entailment::new(r, r % 2 == 1, r + 1, 0.9).expect("valid rule"))
        .collect()
}
