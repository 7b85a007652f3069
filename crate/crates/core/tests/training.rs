use kgec_core::checkpoint::{self, Precision};
use kgec_core::data::{build_known_index, Dataset, Entailment, Triple};
use kgec_core::objective::entailment_penalty;
use kgec_core::synthetic::random_kg;
use kgec_core::train::{format_log_csv, train, TrainConfig, Trainer, LOG_HEADER};
use kgec_core::KgError;

fn tiny() -> Dataset {
    random_kg(8, 2, [20, 0, 0], 9)
}

fn tiny_config() -> TrainConfig {
    TrainConfig {
        dim: 8,
        n_batches: 2,
        max_iters: 200,
        eval_every: 200,
        neg_ratio: 4,
        lr: 0.5,
        eta: 0.001,
        seed: 5,
        precision: Precision::F64,
        ..TrainConfig::default()
    }
}

#[test]
fn positives_outscore_their_corruptions_on_tiny_kg() {
    let dataset = tiny();
    let params = train(&dataset, &[], &tiny_config()).unwrap().params;
    let known = build_known_index(&dataset);
    let (mut right, mut total) = (0usize, 0usize);
    for t in &dataset.train {
        let pos = params.score(t.head, t.rel, t.tail);
        for e in 0..8 {
            for c in [Triple::new(e, t.rel, t.tail), Triple::new(t.head, t.rel, e)] {
                if !known.contains(&c) {
                    total += 1;
                    right += usize::from(pos > params.score(c.head, c.rel, c.tail));
                }
            }
        }
    }
    let frac = right as f64 / total as f64;
    assert!(frac >= 0.9, "only {frac:.3} of pairs ordered correctly");
}

#[test]
fn identical_seeds_give_identical_checkpoints() {
    let dataset = random_kg(30, 3, [150, 20, 20], 2);
    let ents = [Entailment::new(0, false, 1, 0.9).unwrap(), Entailment::new(2, true, 0, 0.6).unwrap()];
    let config = TrainConfig {
        dim: 10,
        n_batches: 5,
        max_iters: 30,
        eval_every: 10,
        mu: 0.5,
        seed: 77,
        precision: Precision::F64,
        ..TrainConfig::default()
    };
    let a = train(&dataset, &ents, &config).unwrap();
    let b = train(&dataset, &ents, &config).unwrap();
    assert_eq!(
        checkpoint::encode(&a.params, Precision::F64),
        checkpoint::encode(&b.params, Precision::F64)
    );
    assert_eq!(format_log_csv(&a.log), format_log_csv(&b.log));

    let other = train(&dataset, &ents, &TrainConfig { seed: 78, ..config }).unwrap();
    assert_ne!(a.params, other.params);
}

#[test]
fn large_mu_drives_penalty_to_zero() {
    let dataset = tiny();
    // one-sided hinges; an equivalence pair would pin Re(r_0) = Re(r_1)
    // exactly, which subgradient steps only reach in the limit
    let ents = [
        Entailment::new(0, false, 1, 1.0).unwrap(),
        Entailment::new(0, true, 1, 0.8).unwrap(),
    ];
    let config = TrainConfig {
        mu: 1e4,
        lr: 0.1,
        max_iters: 500,
        eval_every: 500,
        ..tiny_config()
    };
    let params = train(&dataset, &ents, &config).unwrap().params;
    let penalty = entailment_penalty(&params, &ents);
    assert!(penalty < 1e-3 * ents.len() as f64, "penalty {penalty}");
}

#[test]
fn projection_holds_after_each_step_and_can_be_disabled() {
    let dataset = random_kg(20, 2, [60, 0, 0], 4);
    let mut config = TrainConfig {
        dim: 6,
        n_batches: 6,
        max_iters: 20,
        eval_every: 20,
        lr: 1.0,
        eta: 0.0,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&dataset, &[], config.clone()).unwrap();
    for _ in 0..20 {
        trainer.run_epoch_observed(|p| assert!(p.entities_in_box())).unwrap();
    }

    config.project = false;
    let free = train(&dataset, &[], &config).unwrap().params;
    assert!(!free.entities_in_box());
}

#[test]
fn keeps_best_validation_checkpoint() {
    let dataset = random_kg(40, 3, [200, 30, 0], 8);
    let config = TrainConfig {
        dim: 8,
        n_batches: 4,
        max_iters: 40,
        eval_every: 5,
        seed: 1,
        ..TrainConfig::default()
    };
    let outcome = train(&dataset, &[], &config).unwrap();
    let evaluated: Vec<_> = outcome.log.iter().filter_map(|l| l.valid_mrr.map(|m| (l.epoch, m))).collect();
    assert_eq!(evaluated.len(), 8);
    let best = evaluated.iter().cloned().fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    assert_eq!((outcome.best_epoch, outcome.best_valid_mrr), (best.0, Some(best.1)));
    let known = build_known_index(&dataset);
    let mrr = kgec_core::eval::evaluate(&outcome.params, &dataset.valid, &known).unwrap().mrr;
    assert_eq!(mrr, best.1);

    let csv = format_log_csv(&outcome.log);
    assert!(csv.starts_with(LOG_HEADER));
    assert_eq!(csv.lines().count(), 41);
}

#[test]
fn diverging_run_reports_non_finite_loss() {
    let dataset = tiny();
    let ents = [Entailment::new(0, false, 1, 1.0).unwrap()];
    let config = TrainConfig {
        mu: f64::MAX,
        ..tiny_config()
    };
    match train(&dataset, &ents, &config) {
        Err(KgError::NonFinite { epoch: 0, .. }) => {}
        other => panic!("expected non-finite error, got {:?}", other.map(|o| o.best_epoch)),
    }
}
