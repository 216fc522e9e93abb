use std::process::ExitCode;

use clap::Args;

use crate::common::{build_init, build_law, build_lattice, build_model, exit_code, fmt_hash, OK};
use asyncell::engine::parallel::{run_aggregated_general, run_aggregated_poisson, ParallelConfig};
use asyncell::engine::serial::{run_eventlist, SerialOptions};
use asyncell::engine::sync::run_sync_one_cell;
use asyncell::error::Result;
use asyncell::{ArrivalLaw, Partition, SimError, Trajectory};

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "ising:J=1,H=0,T=2")]
    model: String,
    #[arg(long, default_value = "poisson:1")]
    law: String,
    #[arg(long = "end-time", default_value_t = 5.0)]
    end_time: f64,
    /// First seed; `--runs` consecutive seeds are verified.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    runs: u64,
    /// Subarray sides checked for partition invariance.
    #[arg(long = "m-list", value_delimiter = ',', default_value = "4,8")]
    m_list: Vec<usize>,
    /// Worker counts checked for scheduling independence.
    #[arg(long = "workers-list", value_delimiter = ',', default_value = "1,2")]
    workers_list: Vec<usize>,
    /// Repeats of one configuration with injected scheduling jitter.
    #[arg(long = "jitter-repeats", default_value_t = 3)]
    jitter_repeats: u32,
    /// random | up | down
    #[arg(long, default_value = "random")]
    init: String,
}

struct Report {
    mismatches: u64,
    tie_faults: u64,
}

impl Report {
    fn compare(&mut self, label: &str, reference: &Trajectory, run: Result<Trajectory>) {
        match run {
            Err(SimError::TieFault { time, cell_a, cell_b }) => {
                self.tie_faults += 1;
                println!("{label}: tie fault at t={time} between cells {cell_a} and {cell_b}");
            }
            Err(e) => {
                self.mismatches += 1;
                println!("{label}: run failed: {e}");
            }
            Ok(t) => {
                if t.hash == reference.hash {
                    println!("{label}: hash={} match=yes", fmt_hash(t.hash));
                } else {
                    self.mismatches += 1;
                    println!(
                        "{label}: hash={} match=NO (oracle {})",
                        fmt_hash(t.hash),
                        fmt_hash(reference.hash)
                    );
                    dump_divergence(reference, &t);
                }
            }
        }
    }
}

fn dump_divergence(a: &Trajectory, b: &Trajectory) {
    let n = a.events.len().min(b.events.len());
    for i in 0..n {
        if a.events[i] != b.events[i] {
            println!(
                "  first divergence at event {i}: oracle ({:.9}, cell {}, {} -> {}) vs \
                 ({:.9}, cell {}, {} -> {})",
                a.events[i].time,
                a.events[i].cell,
                a.events[i].old_state,
                a.events[i].new_state,
                b.events[i].time,
                b.events[i].cell,
                b.events[i].old_state,
                b.events[i].new_state,
            );
            return;
        }
    }
    println!(
        "  event lists diverge in length: oracle {} vs {}",
        a.events.len(),
        b.events.len()
    );
}

pub fn run(args: &VerifyArgs) -> Result<ExitCode> {
    let (model_spec, model) = build_model(&args.model, args.dim)?;
    let law = build_law(&args.law)?;
    let init = build_init(&args.init)?;
    let lattice = build_lattice(args.dim, args.n)?;
    println!(
        "config verify dim={} n={} model={} law={} end-time={} seeds={}..{} m-list={:?} \
         workers-list={:?}",
        args.dim,
        args.n,
        model_spec,
        law,
        args.end_time,
        args.seed,
        args.seed + args.runs - 1,
        args.m_list,
        args.workers_list,
    );

    let mut report = Report { mismatches: 0, tie_faults: 0 };
    let serial_opts = SerialOptions { init, record_events: true, max_events: None };

    for seed in args.seed..args.seed + args.runs {
        let oracle = match run_eventlist(&model, &lattice, &law, seed, args.end_time, &serial_opts)
        {
            Ok(t) => t,
            Err(SimError::TieFault { time, cell_a, cell_b }) => {
                report.tie_faults += 1;
                println!(
                    "seed={seed} oracle: tie fault at t={time} between cells {cell_a} and \
                     {cell_b}; skipping comparisons for this seed"
                );
                continue;
            }
            Err(e) => return Err(e),
        };
        println!(
            "seed={seed} oracle hash={} events={}",
            fmt_hash(oracle.hash),
            oracle.event_count
        );
        for &m in &args.m_list {
            for &workers in &args.workers_list {
                let part = Partition::new(lattice, m, model.dependency_degree())?;
                let mut cfg = ParallelConfig::new(workers, args.end_time);
                cfg.init = init;
                let t = run_aggregated_general(&cfg, &model, &part, &law, seed);
                report.compare(&format!("seed={seed} agg m={m} workers={workers}"), &oracle, t);
            }
        }
        // The synchronous engine must agree whenever no ties occur.
        let mut cfg = ParallelConfig::new(*args.workers_list.last().unwrap_or(&1), args.end_time);
        cfg.init = init;
        let t = run_sync_one_cell(&cfg, &model, &lattice, &law, seed);
        report.compare(&format!("seed={seed} sync1"), &oracle, t);

        // Scheduling-jitter stress on the first aggregated configuration.
        if let Some(&m) = args.m_list.first() {
            for rep in 0..args.jitter_repeats {
                let part = Partition::new(lattice, m, model.dependency_degree())?;
                let mut cfg =
                    ParallelConfig::new(*args.workers_list.last().unwrap_or(&1), args.end_time);
                cfg.init = init;
                cfg.jitter_seed = Some(0x5eed ^ u64::from(rep));
                let t = run_aggregated_general(&cfg, &model, &part, &law, seed);
                report.compare(&format!("seed={seed} agg m={m} jitter#{rep}"), &oracle, t);
            }
        }
    }

    // Aggregated-Poisson uniqueness is weaker: per (seed, m) the hash must
    // be stable across workers, but different m may legitimately differ.
    if let ArrivalLaw::Poisson { rate } = law {
        println!("aggregated-poisson weak uniqueness (seed={}):", args.seed);
        let mut per_m = Vec::new();
        for &m in &args.m_list {
            let part = Partition::new(lattice, m, model.dependency_degree())?;
            let mut hashes = Vec::new();
            for &workers in &args.workers_list {
                let mut cfg = ParallelConfig::new(workers, args.end_time);
                cfg.init = init;
                let t = run_aggregated_poisson(&cfg, &model, &part, rate, args.seed)?;
                hashes.push(t.hash);
            }
            let stable = hashes.windows(2).all(|w| w[0] == w[1]);
            println!(
                "  m={m} hash={} stable-across-workers={}",
                fmt_hash(hashes[0]),
                if stable { "yes" } else { "NO" }
            );
            if !stable {
                report.mismatches += 1;
            }
            per_m.push(hashes[0]);
        }
        if per_m.windows(2).any(|w| w[0] != w[1]) {
            println!("  trajectories differ across partitions (allowed: weak uniqueness)");
        } else if per_m.len() > 1 {
            println!("  trajectories coincide across partitions (not required)");
        }
    }

    println!(
        "verify summary: mismatches={} tie-faults={}",
        report.mismatches, report.tie_faults
    );
    if report.mismatches > 0 || report.tie_faults > 0 {
        Ok(exit_code(1))
    } else {
        Ok(OK)
    }
}
