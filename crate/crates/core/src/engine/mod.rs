//! Simulation engines.
//!
//! `serial` holds the reference simulators, including the event-list oracle
//! that defines the exact trajectory every general parallel engine must
//! reproduce. `parallel` holds the multi-worker engines with the
//! conservative local-time waiting discipline, and `sync` the round/barrier
//! structured one-cell engine that stays correct even when arrival times tie.

pub mod parallel;
pub mod serial;
pub mod sync;

use crate::models::Model;
use crate::topology::Lattice;

/// Per-cell dependency neighbor table (the states `next_state` reads).
pub(crate) fn dependency_table(model: &Model, lattice: &Lattice) -> Vec<Vec<u32>> {
    (0..lattice.cell_count())
        .map(|c| model.dependency_neighbors(lattice, c).into_iter().map(|x| x as u32).collect())
        .collect()
}
