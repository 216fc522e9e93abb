use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use asyncell::arrival::ArrivalLaw;
use asyncell::engine::parallel::{run_aggregated_general, run_aggregated_poisson, ParallelConfig};
use asyncell::engine::serial::{run_bkl, run_eventlist, run_standard, SerialOptions};
use asyncell::models::{IsingParams, Model};
use asyncell::topology::{Lattice, Partition};

fn ising2(temperature: f64) -> Model {
    Model::ising(2, IsingParams { coupling: 1.0, field: 0.0, temperature }).unwrap()
}

fn serial_engines(c: &mut Criterion) {
    let model = ising2(2.0);
    let lat = Lattice::new(2, 32).unwrap();
    let law = ArrivalLaw::poisson(1.0).unwrap();
    let end = 4.0;
    let opts = SerialOptions { record_events: false, ..SerialOptions::default() };
    let events = lat.cell_count() as u64 * end as u64; // ~lambda * N * t
    let mut group = c.benchmark_group("serial");
    group.throughput(Throughput::Elements(events));
    group.bench_function("standard_32x32", |b| {
        b.iter(|| run_standard(&model, &lat, 1.0, 7, end, &opts).unwrap())
    });
    group.bench_function("eventlist_32x32", |b| {
        b.iter(|| run_eventlist(&model, &lat, &law, 7, end, &opts).unwrap())
    });
    group.bench_function("bkl_32x32", |b| {
        b.iter(|| run_bkl(&model, &lat, 1.0, 7, end, &opts).unwrap())
    });
    group.finish();
}

fn parallel_engines(c: &mut Criterion) {
    let model = ising2(2.0);
    let lat = Lattice::new(2, 32).unwrap();
    let law = ArrivalLaw::poisson(1.0).unwrap();
    let part = Partition::new(lat, 8, 1).unwrap();
    let end = 4.0;
    let events = lat.cell_count() as u64 * end as u64;
    let mut group = c.benchmark_group("parallel");
    group.throughput(Throughput::Elements(events));
    for workers in [1usize, 2] {
        let mut cfg = ParallelConfig::new(workers, end);
        cfg.record_events = false;
        group.bench_with_input(
            BenchmarkId::new("aggregated_general_32x32_m8", workers),
            &cfg,
            |b, cfg| b.iter(|| run_aggregated_general(cfg, &model, &part, &law, 7).unwrap()),
        );
        group.bench_with_input(
            BenchmarkId::new("aggregated_poisson_32x32_m8", workers),
            &cfg,
            |b, cfg| b.iter(|| run_aggregated_poisson(cfg, &model, &part, 1.0, 7).unwrap()),
        );
        let mut bkl_cfg = cfg.clone();
        bkl_cfg.bkl = true;
        group.bench_with_input(
            BenchmarkId::new("aggregated_bkl_32x32_m8", workers),
            &bkl_cfg,
            |b, cfg| b.iter(|| run_aggregated_poisson(cfg, &model, &part, 1.0, 7).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, serial_engines, parallel_engines);
criterion_main!(benches);
