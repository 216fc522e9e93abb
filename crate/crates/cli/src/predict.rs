use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;

use crate::common::{append_csv, build_law, fmt_opt, OK};
use asyncell::error::{arg_err, Result};
use asyncell::perf::{default_warmup, predict_aggregated, predict_one_cell, EfficiencyEstimate};
use asyncell::ArrivalLaw;

#[derive(Args)]
pub struct PredictArgs {
    /// one-cell | aggregated
    #[arg(long)]
    mode: String,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Array side.
    #[arg(long)]
    n: usize,
    /// Subarray side (aggregated mode).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value = "poisson:1")]
    law: String,
    #[arg(long, default_value_t = 2000)]
    rounds: u64,
    /// Rounds discarded before averaging (default: 10%, at least 100).
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long, default_value_t = 5)]
    replicates: u32,
    #[arg(long = "lag-bound")]
    lag_bound: Option<f64>,
    /// Confidence level: 0.95, 0.99 or 0.9999.
    #[arg(long, default_value_t = 0.9999)]
    level: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Echo the effective configuration and exit without running.
    #[arg(long = "print-config")]
    print_config: bool,
}

pub fn run(args: &PredictArgs) -> Result<ExitCode> {
    let law = build_law(&args.law)?;
    let warmup = args.warmup.unwrap_or_else(|| default_warmup(args.rounds));
    println!(
        "config mode={} dim={} n={} m={} law={} rounds={} warmup={} replicates={} lag-bound={} \
         level={} seed={}",
        args.mode,
        args.dim,
        args.n,
        fmt_opt(&args.m),
        law,
        args.rounds,
        warmup,
        args.replicates,
        fmt_opt(&args.lag_bound),
        args.level,
        args.seed,
    );
    if args.print_config {
        return Ok(OK);
    }

    let est: EfficiencyEstimate = match args.mode.as_str() {
        "one-cell" => {
            if args.m.is_some() {
                return arg_err("one-cell mode takes no --m");
            }
            if args.lag_bound.is_some() {
                return arg_err("the lag bound applies to the aggregated model");
            }
            predict_one_cell(
                args.dim,
                args.n,
                &law,
                args.rounds,
                warmup,
                args.replicates,
                args.seed,
                args.level,
            )?
        }
        "aggregated" => {
            let m = args
                .m
                .ok_or_else(|| asyncell::SimError::InvalidArgument("aggregated mode needs --m".into()))?;
            if args.dim != 2 {
                return arg_err("the aggregated model is defined on 2-D PE grids");
            }
            if !matches!(law, ArrivalLaw::Poisson { .. }) {
                return arg_err("the aggregated model assumes the Poisson law");
            }
            predict_aggregated(
                args.n,
                m,
                args.rounds,
                warmup,
                args.replicates,
                args.seed,
                args.lag_bound,
                args.level,
            )?
        }
        other => return arg_err(format!("unknown mode `{other}` (one-cell or aggregated)")),
    };

    println!(
        "efficiency={:.6} ci-low={:.6} ci-high={:.6} level={} rounds={} warmup={} replicates={}",
        est.mean,
        est.mean - est.half_width,
        est.mean + est.half_width,
        est.level,
        est.rounds,
        est.warmup,
        est.replicates,
    );

    if let Some(csv) = &args.csv {
        let m_field = args.m.map(|m| m.to_string()).unwrap_or_default();
        let lag_field = args.lag_bound.map(|b| b.to_string()).unwrap_or_default();
        append_csv(
            csv,
            "n,m,law,lag_bound,efficiency,ci_low,ci_high,rounds",
            &format!(
                "{},{},\"{}\",{},{},{},{},{}",
                args.n,
                m_field,
                law,
                lag_field,
                est.mean,
                est.mean - est.half_width,
                est.mean + est.half_width,
                est.rounds,
            ),
        )?;
    }
    Ok(OK)
}
