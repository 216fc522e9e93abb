use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Args;

use crate::common::{
    append_csv, build_init, build_law, build_lattice, build_model, poisson_rate, OK,
};
use asyncell::engine::parallel::{run_aggregated_poisson, ParallelConfig};
use asyncell::engine::serial::{run_standard, SerialOptions};
use asyncell::error::Result;
use asyncell::perf::{measured_efficiency, speedup};
use asyncell::Partition;

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long)]
    n: usize,
    /// Subarray side (default: n, a single PE).
    #[arg(long)]
    m: Option<usize>,
    /// Worker threads for the parallel run.
    #[arg(long, default_value_t = 1)]
    pes: usize,
    #[arg(long, default_value = "ising:J=1,H=0,T=1")]
    model: String,
    #[arg(long, default_value = "poisson:1")]
    law: String,
    #[arg(long = "end-time", default_value_t = 10.0)]
    end_time: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// random | up | down
    #[arg(long, default_value = "random")]
    init: String,
    #[arg(long)]
    csv: Option<PathBuf>,
}

pub fn run(args: &BenchArgs) -> Result<ExitCode> {
    let (model_spec, model) = build_model(&args.model, args.dim)?;
    let law = build_law(&args.law)?;
    let rate = poisson_rate(&law)?;
    let init = build_init(&args.init)?;
    let lattice = build_lattice(args.dim, args.n)?;
    let m = args.m.unwrap_or(args.n);
    let partition = Partition::new(lattice, m, model.dependency_degree())?;
    println!(
        "config bench dim={} n={} m={} pes={} model={} law={} end-time={} seed={}",
        args.dim, args.n, m, args.pes, model_spec, law, args.end_time, args.seed
    );

    let mut cfg = ParallelConfig::new(args.pes, args.end_time);
    cfg.init = init;
    cfg.record_events = false;
    let started = Instant::now();
    let parallel = run_aggregated_poisson(&cfg, &model, &partition, rate, args.seed)?;
    let parallel_s = started.elapsed().as_secs_f64();

    // Serial run at matched work: exactly as many processed arrivals.
    let serial_opts =
        SerialOptions { init, record_events: false, max_events: Some(parallel.event_count) };
    let started = Instant::now();
    let serial = run_standard(&model, &lattice, rate, args.seed, f64::MAX, &serial_opts)?;
    let serial_s = started.elapsed().as_secs_f64();

    let matched = serial.event_count == parallel.event_count;
    println!(
        "events parallel={} serial={} matched={}",
        parallel.event_count,
        serial.event_count,
        if matched { "yes" } else { "NO" }
    );
    let eff = measured_efficiency(serial_s, args.pes, parallel_s)?;
    println!(
        "serial-seconds={serial_s:.4} parallel-seconds={parallel_s:.4} workers={} \
         efficiency={eff:.4} speedup={:.4}",
        args.pes,
        speedup(eff, args.pes)
    );

    if let Some(csv) = &args.csv {
        append_csv(
            csv,
            "n,m,workers,events,serial_s,parallel_s,efficiency,speedup",
            &format!(
                "{},{},{},{},{},{},{},{}",
                args.n,
                m,
                args.pes,
                parallel.event_count,
                serial_s,
                parallel_s,
                eff,
                speedup(eff, args.pes)
            ),
        )?;
    }
    Ok(OK)
}
