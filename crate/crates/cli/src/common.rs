//! Shared argument parsing and output helpers.

use std::io::Write;
use std::path::Path;

use asyncell::error::{arg_err, Result};
use asyncell::{ArrivalLaw, InitKind, Lattice, Model, ModelSpec};

pub fn build_model(spec: &str, dim: usize) -> Result<(ModelSpec, Model)> {
    let spec = ModelSpec::parse(spec)?;
    let model = spec.build(dim)?;
    Ok((spec, model))
}

pub fn build_law(s: &str) -> Result<ArrivalLaw> {
    ArrivalLaw::parse(s)
}

pub fn build_lattice(dim: usize, n: usize) -> Result<Lattice> {
    Lattice::new(dim, n)
}

pub fn build_init(s: &str) -> Result<InitKind> {
    InitKind::parse(s)
}

/// The Poisson-specialized engines need the law's rate.
pub fn poisson_rate(law: &ArrivalLaw) -> Result<f64> {
    match law {
        ArrivalLaw::Poisson { rate } => Ok(*rate),
        other => arg_err(format!("this engine requires a Poisson law (got `{other}`)")),
    }
}

pub fn fmt_hash(h: u64) -> String {
    format!("{h:#018x}")
}

pub fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "none".to_string(),
    }
}

/// Appends one CSV row, writing the header first when the file is new.
/// '.' decimal, LF line endings.
pub fn append_csv(path: &Path, header: &str, row: &str) -> Result<()> {
    let new = !path.exists();
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if new {
        f.write_all(header.as_bytes())?;
        f.write_all(b"\n")?;
    }
    f.write_all(row.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub const OK: std::process::ExitCode = std::process::ExitCode::SUCCESS;

pub fn exit_code(n: u8) -> std::process::ExitCode {
    std::process::ExitCode::from(n)
}
