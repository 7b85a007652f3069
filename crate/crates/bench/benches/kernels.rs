use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use kgec_bench::{examples, graph, params, rules};
use kgec_core::data::build_known_index;
use kgec_core::eval::evaluate;
use kgec_core::objective::{loss_and_gradient, L2Scope, ObjectiveWeights};

fn scoring(c: &mut Criterion) {
    let data = graph(1000, 20, 5000, 0);
    let mut group = c.benchmark_group("score");
    for d in [100, 200] {
        let p = params(&data, d);
        group.throughput(Throughput::Elements(data.train.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(d), &p, |b, p| {
            b.iter(|| data.train.iter().map(|t| p.score(t.head, t.rel, t.tail)).sum::<f64>())
        });
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let data = graph(1000, 20, 5000, 0);
    let batch = examples(&data.train, 1000, 500, 10);
    let ents = rules(20);
    let weights = ObjectiveWeights {
        mu: 1.0,
        eta: 0.01,
        l2_scope: L2Scope::Touched,
    };
    let mut group = c.benchmark_group("loss_and_gradient");
    for d in [100, 200] {
        let p = params(&data, d);
        group.throughput(Throughput::Elements(batch.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(d), &p, |b, p| {
            b.iter(|| loss_and_gradient(black_box(p), &batch, &ents, &weights))
        });
    }
    group.finish();
}

fn ranking(c: &mut Criterion) {
    let data = graph(2000, 20, 10_000, 200);
    let known = build_known_index(&data);
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    for d in [100, 200] {
        let p = params(&data, d);
        group.throughput(Throughput::Elements(data.test.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(d), &p, |b, p| {
            b.iter(|| evaluate(black_box(p), &data.test, &known).expect("non-empty test split"))
        });
    }
    group.finish();
}

criterion_group!(benches, scoring, gradient, ranking);
criterion_main!(benches);
