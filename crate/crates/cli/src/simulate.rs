use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;

use crate::common::{
    append_csv, build_init, build_law, build_lattice, build_model, fmt_hash, fmt_opt,
    poisson_rate, OK,
};
use asyncell::engine::parallel::{
    run_aggregated_general, run_aggregated_poisson, run_async_one_cell, ParallelConfig,
};
use asyncell::engine::serial::{run_bkl, run_eventlist, run_standard, SerialOptions};
use asyncell::engine::sync::run_sync_one_cell;
use asyncell::error::{arg_err, Result};
use asyncell::snapshots::SnapshotConfig;
use asyncell::{Partition, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Engine {
    SerialStandard,
    SerialEventlist,
    SerialBkl,
    Async1,
    Sync1,
    Aggregated,
    AggregatedPoisson,
}

impl Engine {
    fn parse(s: &str) -> Result<Engine> {
        Ok(match s {
            "serial-standard" => Engine::SerialStandard,
            "serial-eventlist" => Engine::SerialEventlist,
            "serial-bkl" => Engine::SerialBkl,
            "async1" => Engine::Async1,
            "sync1" => Engine::Sync1,
            "agg" => Engine::Aggregated,
            "agg-poisson" => Engine::AggregatedPoisson,
            _ => {
                return arg_err(format!(
                    "unknown engine `{s}` (serial-standard, serial-eventlist, serial-bkl, \
                     async1, sync1, agg, agg-poisson)"
                ))
            }
        })
    }

    fn aggregated(self) -> bool {
        matches!(self, Engine::Aggregated | Engine::AggregatedPoisson)
    }
}

#[derive(Args)]
pub struct SimulateArgs {
    /// serial-standard | serial-eventlist | serial-bkl | async1 | sync1 |
    /// agg | agg-poisson
    #[arg(long)]
    engine: String,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Lattice side.
    #[arg(long)]
    n: usize,
    /// Subarray side for the aggregated engines (default: n, a single PE).
    #[arg(long)]
    m: Option<usize>,
    /// Worker threads for the parallel engines.
    #[arg(long, default_value_t = 1)]
    pes: usize,
    #[arg(long = "end-time")]
    end_time: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// ising:J=<f>,H=<f>,T=<f> | life
    #[arg(long, default_value = "ising:J=1,H=0,T=1")]
    model: String,
    /// poisson:<rate> | uniform | power:<k> | gaussian:<mean>,<std> | fixed
    #[arg(long, default_value = "poisson:1")]
    law: String,
    /// Cap on how far a PE may run ahead of the slowest local time.
    #[arg(long = "lag-bound")]
    lag_bound: Option<f64>,
    /// Rejection-free kernel selection (agg-poisson only).
    #[arg(long)]
    bkl: bool,
    /// Snapshot interval in simulated time; enables pattern output.
    #[arg(long = "snapshot-dt")]
    snapshot_dt: Option<f64>,
    /// Snapshot buffer frames.
    #[arg(long, default_value_t = 2)]
    frames: usize,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// random | up | down
    #[arg(long, default_value = "random")]
    init: String,
    /// Append a result row to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Echo the effective configuration and exit without running.
    #[arg(long = "print-config")]
    print_config: bool,
}

pub fn run(args: &SimulateArgs) -> Result<ExitCode> {
    let engine = Engine::parse(&args.engine)?;
    let (model_spec, model) = build_model(&args.model, args.dim)?;
    let law = build_law(&args.law)?;
    let init = build_init(&args.init)?;
    let lattice = build_lattice(args.dim, args.n)?;
    let m = args.m.unwrap_or(args.n);

    if args.bkl && engine != Engine::AggregatedPoisson {
        return arg_err("--bkl applies to the aggregated Poisson engine (--engine agg-poisson)");
    }
    if args.snapshot_dt.is_some() && !engine.aggregated() {
        return arg_err("snapshot output requires an aggregated engine (agg or agg-poisson)");
    }
    if args.snapshot_dt.is_some() && args.out_dir.is_none() {
        return arg_err("--snapshot-dt requires --out-dir");
    }
    if args.lag_bound.is_some() && !engine.aggregated() {
        return arg_err("--lag-bound applies to the aggregated engines");
    }

    println!(
        "config engine={} dim={} n={} m={} pes={} seed={} end-time={} model={} law={} init={} \
         lag-bound={} bkl={} snapshot-dt={} frames={}",
        args.engine,
        args.dim,
        args.n,
        m,
        args.pes,
        args.seed,
        args.end_time,
        model_spec,
        law,
        init,
        fmt_opt(&args.lag_bound),
        args.bkl,
        fmt_opt(&args.snapshot_dt),
        args.frames,
    );
    if args.print_config {
        return Ok(OK);
    }

    let serial_opts =
        SerialOptions { init, record_events: false, max_events: None };
    let mut cfg = ParallelConfig::new(args.pes, args.end_time);
    cfg.init = init;
    cfg.record_events = false;
    cfg.lag_bound = args.lag_bound;
    cfg.bkl = args.bkl;
    cfg.check_invariants = args.snapshot_dt.is_some();
    if let Some(dt) = args.snapshot_dt {
        cfg.snapshots = Some(SnapshotConfig {
            interval: dt,
            frames: args.frames,
            out_dir: args.out_dir.clone().unwrap(),
        });
    }

    let trajectory: Trajectory = match engine {
        Engine::SerialStandard => run_standard(
            &model,
            &lattice,
            poisson_rate(&law)?,
            args.seed,
            args.end_time,
            &serial_opts,
        )?,
        Engine::SerialEventlist => {
            run_eventlist(&model, &lattice, &law, args.seed, args.end_time, &serial_opts)?
        }
        Engine::SerialBkl => run_bkl(
            &model,
            &lattice,
            poisson_rate(&law)?,
            args.seed,
            args.end_time,
            &serial_opts,
        )?,
        Engine::Async1 => run_async_one_cell(&cfg, &model, &lattice, &law, args.seed)?,
        Engine::Sync1 => run_sync_one_cell(&cfg, &model, &lattice, &law, args.seed)?,
        Engine::Aggregated => {
            let partition = Partition::new(lattice, m, model.dependency_degree())?;
            run_aggregated_general(&cfg, &model, &partition, &law, args.seed)?
        }
        Engine::AggregatedPoisson => {
            let partition = Partition::new(lattice, m, model.dependency_degree())?;
            run_aggregated_poisson(&cfg, &model, &partition, poisson_rate(&law)?, args.seed)?
        }
    };

    println!(
        "events={} flips={} hash={}",
        trajectory.event_count,
        trajectory.stats.flips,
        fmt_hash(trajectory.hash)
    );
    let s = &trajectory.stats;
    println!(
        "stats blocked-polls={} max-time-spread={} rounds={} eligible-fraction={} \
         kernel-selections={} boundary-selections={} kernel-rejections={}",
        s.blocked_polls,
        fmt_opt(&s.max_time_spread),
        s.rounds,
        fmt_opt(&s.eligible_fraction),
        s.kernel_selections,
        s.boundary_selections,
        s.kernel_rejections,
    );

    if let Some(csv) = &args.csv {
        append_csv(
            csv,
            "engine,dim,n,m,pes,seed,end_time,model,law,events,flips,hash",
            &format!(
                "{},{},{},{},{},{},{},\"{}\",\"{}\",{},{},{}",
                args.engine,
                args.dim,
                args.n,
                m,
                args.pes,
                args.seed,
                args.end_time,
                model_spec,
                law,
                trajectory.event_count,
                trajectory.stats.flips,
                fmt_hash(trajectory.hash)
            ),
        )?;
    }
    Ok(OK)
}
