//! Seeded synthetic knowledge graphs for tests, benchmarks and sanity runs.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::TypeLabels;
use crate::data::{Dataset, Entailment, Triple, Vocab};

/// A generated graph, plus the rules and labels planted into it.
#[derive(Debug, Clone)]
pub struct SyntheticKg {
    pub dataset: Dataset,
    /// Entailments that hold by construction.
    pub planted: Vec<Entailment>,
    pub labels: TypeLabels,
}

fn vocab(n: usize, m: usize) -> Vocab {
    let mut vocab = Vocab::new();
    for e in 0..n {
        vocab.entities.intern(&format!("e{e}"));
    }
    for r in 0..m {
        vocab.relations.intern(&format!("r{r}"));
    }
    vocab
}

/// Uniformly random distinct triples, split into train/valid/test by the
/// given sizes.
pub fn random_kg(n: usize, m: usize, sizes: [usize; 3], seed: u64) -> Dataset {
    let total: usize = sizes.iter().sum();
    assert!(total <= n * n * m, "not enough distinct triples");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut triples = Vec::with_capacity(total);
    while triples.len() < total {
        let t = Triple::new(rng.random_range(0..n), rng.random_range(0..m), rng.random_range(0..n));
        if seen.insert(t) {
            triples.push(t);
        }
    }
    let test = triples.split_off(sizes[0] + sizes[1]);
    let valid = triples.split_off(sizes[0]);
    Dataset {
        train: triples,
        valid,
        test,
        vocab: vocab(n, m),
    }
}

/// Samples `count` distinct `(h, t)` pairs with `h` in cluster `c` and `t`
/// in `target(c)` for randomly chosen clusters.
fn cluster_pairs(
    rng: &mut ChaCha8Rng,
    clusters: &[Vec<usize>],
    target: &[usize],
    count: usize,
    exclude: &BTreeSet<(usize, usize)>,
) -> Vec<(usize, usize)> {
    let mut out = BTreeSet::new();
    while out.len() < count {
        let c = rng.random_range(0..clusters.len());
        let h = *clusters[c].choose(rng).unwrap();
        let t = *clusters[target[c]].choose(rng).unwrap();
        if h != t && !exclude.contains(&(h, t)) {
            out.insert((h, t));
        }
    }
    let mut out: Vec<_> = out.into_iter().collect();
    out.shuffle(rng);
    out
}

/// 200 entities in 5 clusters, 10 relations. Relations `0..3` are premises
/// and `3..6` their conclusions (`r_i ⊂ r_{i+3}`); `6..10` are unrelated.
/// Each relation maps clusters through its own random permutation. 20% of
/// every conclusion's facts are held out for test, drawn from the part
/// implied by its premise, so only the rule can recover them.
pub fn planted_entailment_kg(seed: u64) -> SyntheticKg {
    const N: usize = 200;
    const M: usize = 10;
    const CLUSTERS: usize = 5;
    const PREMISE_FACTS: usize = 120;
    const EXTRA_FACTS: usize = 40;
    const OTHER_FACTS: usize = 150;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..N).collect();
    ids.shuffle(&mut rng);
    let clusters: Vec<Vec<usize>> = ids.chunks(N / CLUSTERS).map(<[usize]>::to_vec).collect();
    let targets: Vec<Vec<usize>> = (0..M)
        .map(|_| {
            let mut p: Vec<usize> = (0..CLUSTERS).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut planted = Vec::new();
    for i in 0..3 {
        let (p, q) = (i, i + 3);
        let premise = cluster_pairs(&mut rng, &clusters, &targets[p], PREMISE_FACTS, &BTreeSet::new());
        let taken: BTreeSet<_> = premise.iter().copied().collect();
        let extra = cluster_pairs(&mut rng, &clusters, &targets[p], EXTRA_FACTS, &taken);
        let held = (PREMISE_FACTS + EXTRA_FACTS) / 5;
        for (j, &(h, t)) in premise.iter().enumerate() {
            train.push(Triple::new(h, p, t));
            if j < held {
                test.push(Triple::new(h, q, t));
            } else {
                train.push(Triple::new(h, q, t));
            }
        }
        train.extend(extra.iter().map(|&(h, t)| Triple::new(h, q, t)));
        planted.push(Entailment::new(p, false, q, 1.0).expect("valid rule"));
    }
    for r in 6..M {
        let pairs = cluster_pairs(&mut rng, &clusters, &targets[r], OTHER_FACTS, &BTreeSet::new());
        train.extend(pairs.iter().map(|&(h, t)| Triple::new(h, r, t)));
    }
    train.shuffle(&mut rng);

    let mut labels = TypeLabels::new();
    for (c, members) in clusters.iter().enumerate() {
        for &e in members {
            labels.insert(e, &format!("cluster{c}"));
        }
    }
    SyntheticKg {
        dataset: Dataset {
            train,
            valid: Vec::new(),
            test,
            vocab: vocab(N, M),
        },
        planted,
        labels,
    }
}

/// 4 types × 30 entities. Each relation links one fixed source type to one
/// fixed target type, so every relation is type-segregated. Relations come
/// in pairs `(2k, 2k+1)` where `2k ⊂ 2k+1`, giving entailments to mine.
pub fn typed_kg(seed: u64) -> SyntheticKg {
    const TYPES: usize = 4;
    const PER_TYPE: usize = 30;
    const PAIRS: usize = 4;
    const SUB_FACTS: usize = 60;
    const EXTRA_FACTS: usize = 30;
    let n = TYPES * PER_TYPE;
    let m = 2 * PAIRS;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members: Vec<Vec<usize>> = (0..TYPES)
        .map(|t| (t * PER_TYPE..(t + 1) * PER_TYPE).collect())
        .collect();

    let mut train = Vec::new();
    let mut planted = Vec::new();
    for k in 0..PAIRS {
        let (src, dst) = (k % TYPES, (k + 1) % TYPES);
        let mut facts = BTreeSet::new();
        while facts.len() < SUB_FACTS + EXTRA_FACTS {
            let h = *members[src].choose(&mut rng).unwrap();
            let t = *members[dst].choose(&mut rng).unwrap();
            facts.insert((h, t));
        }
        let mut facts: Vec<_> = facts.into_iter().collect();
        facts.shuffle(&mut rng);
        let (sub, sup) = (2 * k, 2 * k + 1);
        for (j, &(h, t)) in facts.iter().enumerate() {
            if j < SUB_FACTS {
                train.push(Triple::new(h, sub, t));
            }
            train.push(Triple::new(h, sup, t));
        }
        planted.push(Entailment::new(sub, false, sup, 1.0).expect("valid rule"));
    }
    train.shuffle(&mut rng);

    let mut labels = TypeLabels::new();
    for (t, ms) in members.iter().enumerate() {
        for &e in ms {
            labels.insert(e, &format!("type{t}"));
        }
    }
    SyntheticKg {
        dataset: Dataset {
            train,
            valid: Vec::new(),
            test: Vec::new(),
            vocab: vocab(n, m),
        },
        planted,
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::rule_counts;

    #[test]
    fn random_kg_sizes_and_disjointness() {
        let d = random_kg(30, 5, [100, 10, 10], 1);
        assert_eq!((d.train.len(), d.valid.len(), d.test.len()), (100, 10, 10));
        assert_eq!(d.overlap_count(), 0);
        assert_eq!(d.vocab.n_entities(), 30);
    }

    #[test]
    fn planted_rules_hold_on_full_graph() {
        let kg = planted_entailment_kg(3);
        let d = &kg.dataset;
        assert_eq!(d.vocab.n_entities(), 200);
        assert_eq!(d.vocab.n_relations(), 10);
        assert_eq!(d.overlap_count(), 0);
        let all: Vec<Triple> = d.train.iter().chain(&d.test).copied().collect();
        let counts = rule_counts(&all);
        for e in &kg.planted {
            let (support, _) = counts[&(e.premise, false, e.conclusion)];
            assert_eq!(support, 120);
        }
        assert_eq!(d.test.len(), 3 * 32);
        assert!(d.test.iter().all(|t| (3..6).contains(&t.rel)));
    }

    #[test]
    fn typed_relations_are_segregated() {
        let kg = typed_kg(0);
        let ty = |e: usize| kg.labels.labels[&e];
        for t in &kg.dataset.train {
            let k = t.rel / 2;
            assert_eq!(ty(t.head), k % 4);
            assert_eq!(ty(t.tail), (k + 1) % 4);
        }
        assert_eq!(kg.labels.labels.len(), 120);
    }

    #[test]
    fn generators_are_seeded() {
        assert_eq!(planted_entailment_kg(5).dataset.train, planted_entailment_kg(5).dataset.train);
        assert_ne!(planted_entailment_kg(5).dataset.train, planted_entailment_kg(6).dataset.train);
    }
}
