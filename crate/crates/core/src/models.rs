//! Cell state-update rules: continuous-time Glauber Ising dynamics with a
//! precomputed flip-probability table, and a deterministic asynchronous
//! Game of Life.
//!
//! States are `i8` everywhere: Ising spins are -1/+1, Life cells 0/1.

use crate::error::{arg_err, Result};
use crate::streams::{Stream, StreamId};
use crate::topology::Lattice;

/// Ising couplings in energy units: `E = -J * sum s s' - H * sum s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingParams {
    pub coupling: f64,
    pub field: f64,
    pub temperature: f64,
}

/// Flip probabilities for every `(spin, neighbor-spin-sum)` combination.
///
/// Entry layout follows the index encoding
/// `(sum + 2*dim)/2 + (2*dim + 1) * (spin + 1)/2`; 10 entries in 2-D,
/// 6 in 1-D, 14 in 3-D.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipTable {
    dim: usize,
    probs: Vec<f64>,
}

impl FlipTable {
    pub fn new(dim: usize, params: &IsingParams) -> Result<FlipTable> {
        if !(1..=3).contains(&dim) {
            return arg_err(format!("dim must be 1, 2, or 3 (got {dim})"));
        }
        if !(params.temperature > 0.0 && params.temperature.is_finite()) {
            return arg_err(format!(
                "temperature must be positive (got {})",
                params.temperature
            ));
        }
        let sums = 2 * dim + 1;
        let mut probs = vec![0.0; 2 * sums];
        for j in 0..2 {
            let spin = (2 * j as i32 - 1) as f64;
            for i in 0..sums {
                let sum = (2 * i as i32 - 2 * dim as i32) as f64;
                let delta_e = 2.0 * (params.coupling * spin * sum + params.field * spin);
                let x = (-delta_e / params.temperature).exp();
                probs[i + sums * j] = x / (1.0 + x);
            }
        }
        Ok(FlipTable { dim, probs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.probs
    }

    /// Maps `(spin, neighbor sum)` onto the table index; bijective onto
    /// `0..2*(2*dim+1)`.
    pub fn index(&self, spin: i8, neighbor_sum: i32) -> Result<usize> {
        if spin != 1 && spin != -1 {
            return arg_err(format!("spin must be -1 or +1 (got {spin})"));
        }
        let max = 2 * self.dim as i32;
        if neighbor_sum % 2 != 0 || neighbor_sum.abs() > max {
            return arg_err(format!(
                "neighbor sum must be even in [-{max}, {max}] (got {neighbor_sum})"
            ));
        }
        let sums = 2 * self.dim + 1;
        Ok(((neighbor_sum + max) / 2) as usize + sums * ((spin as i32 + 1) / 2) as usize)
    }

    #[inline]
    pub fn prob(&self, spin: i8, neighbor_sum: i32) -> f64 {
        let max = 2 * self.dim as i32;
        let sums = 2 * self.dim + 1;
        let idx = ((neighbor_sum + max) / 2) as usize + sums * ((spin as i32 + 1) / 2) as usize;
        self.probs[idx]
    }
}

/// A cell update rule. The model decides which neighbor states it reads
/// (von Neumann for Ising, Moore for Life) and whether an update consumes a
/// random draw.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Ising { params: IsingParams, table: FlipTable },
    Life,
}

impl Model {
    pub fn ising(dim: usize, params: IsingParams) -> Result<Model> {
        let table = FlipTable::new(dim, &params)?;
        Ok(Model::Ising { params, table })
    }

    pub fn life() -> Model {
        Model::Life
    }

    pub fn validate_lattice(&self, lattice: &Lattice) -> Result<()> {
        match self {
            Model::Ising { table, .. } => {
                if table.dim() != lattice.dim() {
                    return arg_err(format!(
                        "flip table built for dim {} but lattice has dim {}",
                        table.dim(),
                        lattice.dim()
                    ));
                }
            }
            Model::Life => {
                if lattice.dim() != 2 {
                    return arg_err("the Life rule is a 2-D model");
                }
            }
        }
        Ok(())
    }

    /// The neighborhood degree the waiting discipline must cover. The Moore
    /// neighborhood sits inside the second-degree von Neumann set.
    pub fn dependency_degree(&self) -> usize {
        match self {
            Model::Ising { .. } => 1,
            Model::Life => 2,
        }
    }

    /// Whether `next_state` consumes a uniform draw.
    pub fn needs_flip_draw(&self) -> bool {
        matches!(self, Model::Ising { .. })
    }

    /// The cells whose states `next_state` reads, in ascending id order.
    pub fn dependency_neighbors(&self, lattice: &Lattice, cell: usize) -> Vec<usize> {
        match self {
            Model::Ising { .. } => lattice.von_neumann(cell),
            Model::Life => lattice.moore(cell),
        }
    }

    /// The state at the arrival instant, computed from the states just
    /// before it. `r` must be supplied exactly when `needs_flip_draw()`.
    #[inline]
    pub fn next_state(&self, own: i8, neighbors: &[i8], r: Option<f64>) -> i8 {
        match self {
            Model::Ising { table, .. } => {
                let sum: i32 = neighbors.iter().map(|&s| s as i32).sum();
                let p = table.prob(own, sum);
                if r.expect("ising update needs a draw") < p {
                    -own
                } else {
                    own
                }
            }
            Model::Life => {
                let live = neighbors.iter().filter(|&&s| s == 1).count();
                match (own, live) {
                    (1, 2) | (1, 3) => 1,
                    (1, _) => 0,
                    (0, 3) => 1,
                    (0, _) => 0,
                    _ => panic!("life state must be 0 or 1"),
                }
            }
        }
    }

    /// Probability that an arrival changes the cell's state, given the
    /// current neighborhood. Deterministic models yield 0 or 1.
    pub fn flip_probability(&self, own: i8, neighbors: &[i8]) -> f64 {
        match self {
            Model::Ising { table, .. } => {
                let sum: i32 = neighbors.iter().map(|&s| s as i32).sum();
                table.prob(own, sum)
            }
            Model::Life => {
                if self.next_state(own, neighbors, None) != own {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// The state after a realized change.
    #[inline]
    pub fn flipped(&self, own: i8) -> i8 {
        match self {
            Model::Ising { .. } => -own,
            Model::Life => 1 - own,
        }
    }

    pub fn flip_table(&self) -> Option<&FlipTable> {
        match self {
            Model::Ising { table, .. } => Some(table),
            Model::Life => None,
        }
    }

    fn state_pair(&self) -> (i8, i8) {
        match self {
            Model::Ising { .. } => (-1, 1),
            Model::Life => (0, 1),
        }
    }
}

/// How the lattice is populated at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Each cell independently takes either state with probability 1/2,
    /// from its own initialization stream.
    Random,
    /// All spins +1 / all cells alive.
    Up,
    /// All spins -1 / all cells dead.
    Down,
}

impl InitKind {
    pub fn parse(s: &str) -> Result<InitKind> {
        match s {
            "random" => Ok(InitKind::Random),
            "up" => Ok(InitKind::Up),
            "down" => Ok(InitKind::Down),
            _ => arg_err(format!("unrecognized initial state `{s}`")),
        }
    }
}

impl std::fmt::Display for InitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitKind::Random => write!(f, "random"),
            InitKind::Up => write!(f, "up"),
            InitKind::Down => write!(f, "down"),
        }
    }
}

/// Initial configuration; identical for every engine and partition given the
/// same seed, because each cell draws from its own init stream.
pub fn initial_states(model: &Model, lattice: &Lattice, seed: u64, kind: InitKind) -> Vec<i8> {
    let (low, high) = model.state_pair();
    let n = lattice.cell_count();
    match kind {
        InitKind::Up => vec![high; n],
        InitKind::Down => vec![low; n],
        InitKind::Random => (0..n)
            .map(|c| {
                let mut s = Stream::new(seed, StreamId::init(c));
                if s.next_uniform() < 0.5 {
                    low
                } else {
                    high
                }
            })
            .collect(),
    }
}

/// Command-line model syntax: `ising:J=<f>,H=<f>,T=<f> | life`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    Ising(IsingParams),
    Life,
}

impl ModelSpec {
    pub fn parse(s: &str) -> Result<ModelSpec> {
        if s == "life" {
            return Ok(ModelSpec::Life);
        }
        let bad = || {
            crate::error::SimError::InvalidArgument(format!(
                "unrecognized model `{s}` (expected `ising:J=<f>,H=<f>,T=<f>` or `life`)"
            ))
        };
        let rest = s.strip_prefix("ising:").ok_or_else(bad)?;
        let (mut j, mut h, mut t) = (None, None, None);
        for part in rest.split(',') {
            let (key, val) = part.split_once('=').ok_or_else(bad)?;
            let val: f64 = val.parse().map_err(|_| bad())?;
            match key {
                "J" => j = Some(val),
                "H" => h = Some(val),
                "T" => t = Some(val),
                _ => return Err(bad()),
            }
        }
        Ok(ModelSpec::Ising(IsingParams {
            coupling: j.ok_or_else(bad)?,
            field: h.ok_or_else(bad)?,
            temperature: t.ok_or_else(bad)?,
        }))
    }

    pub fn build(&self, dim: usize) -> Result<Model> {
        match self {
            ModelSpec::Ising(params) => Model::ising(dim, *params),
            ModelSpec::Life => Ok(Model::life()),
        }
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelSpec::Ising(p) => {
                write!(f, "ising:J={},H={},T={}", p.coupling, p.field, p.temperature)
            }
            ModelSpec::Life => write!(f, "life"),
        }
    }
}
