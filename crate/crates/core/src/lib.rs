//! Simulation engine for continuous-time asynchronous cellular arrays.
//!
//! Cells of a periodic lattice receive update chances at random arrival
//! times; a serial reference simulator and several parallel engines with
//! per-PE local times produce the identical committed event history for the
//! same seed. On top of the engines sit rejection-free (n-fold way)
//! acceleration, bounded-lag snapshot output, and round-model predictors for
//! parallel efficiency.

pub mod arrival;
pub mod bkl;
pub mod engine;
pub mod error;
pub mod models;
pub mod perf;
pub mod snapshots;
pub mod stats;
pub mod streams;
pub mod topology;
pub mod trajectory;

pub use arrival::{cumulative_next_arrival, ArrivalLaw};
pub use error::{Result, SimError};
pub use models::{initial_states, FlipTable, InitKind, IsingParams, Model, ModelSpec};
pub use streams::{Stream, StreamId, StreamKind};
pub use topology::{Lattice, Partition};
pub use trajectory::{Event, RunStats, Trajectory};
