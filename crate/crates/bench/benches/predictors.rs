use criterion::{criterion_group, criterion_main, Criterion, Throughput};

use asyncell::arrival::ArrivalLaw;
use asyncell::perf::{predict_aggregated, predict_one_cell};

fn one_cell(c: &mut Criterion) {
    let law = ArrivalLaw::poisson(1.0).unwrap();
    let mut group = c.benchmark_group("predict_one_cell");
    let (n, rounds) = (64usize, 500u64);
    group.throughput(Throughput::Elements((n * n) as u64 * rounds));
    group.bench_function("2d_64_500rounds", |b| {
        b.iter(|| predict_one_cell(2, n, &law, rounds, 100, 1, 3, 0.95).unwrap())
    });
    group.finish();
}

fn aggregated(c: &mut Criterion) {
    let mut group = c.benchmark_group("predict_aggregated");
    let rounds = 1000u64;
    group.throughput(Throughput::Elements(25 * rounds));
    group.bench_function("n120_m24_1000rounds", |b| {
        b.iter(|| predict_aggregated(120, 24, rounds, 100, 1, 3, None, 0.95).unwrap())
    });
    group.bench_function("n384_m12_lagged_1000rounds", |b| {
        b.iter(|| predict_aggregated(384, 12, rounds, 100, 1, 3, Some(1.0), 0.95).unwrap())
    });
    group.finish();
}

criterion_group!(benches, one_cell, aggregated);
criterion_main!(benches);
