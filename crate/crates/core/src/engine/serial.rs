//! Reference serial simulators.
//!
//! `run_standard` is the classic cumulative-stream procedure (one global
//! Poisson stream of rate `rate * N`, cell chosen uniformly per arrival).
//! `run_eventlist` simulates per-cell arrival streams in global time order
//! and is the exact-trajectory oracle for the general parallel engines.
//! `run_bkl` is the serial rejection-free variant.

use crate::arrival::ArrivalLaw;
use crate::bkl::{self, ClassPartition, ClassSet, Selection};
use crate::engine::dependency_table;
use crate::error::{arg_err, Result, SimError};
use crate::models::{initial_states, InitKind, Model};
use crate::streams::{Stream, StreamId};
use crate::topology::Lattice;
use crate::trajectory::{Event, Recorder, RunStats, Trajectory};

use std::cmp::Reverse;
use std::collections::BinaryHeap;

#[derive(Debug, Clone)]
pub struct SerialOptions {
    pub init: InitKind,
    pub record_events: bool,
    /// Stop after this many processed arrivals even if the end time has not
    /// been reached (used for matched-work benchmarking).
    pub max_events: Option<u64>,
}

impl Default for SerialOptions {
    fn default() -> Self {
        SerialOptions { init: InitKind::Random, record_events: true, max_events: None }
    }
}

fn validate_common(model: &Model, lattice: &Lattice, end_time: f64) -> Result<()> {
    model.validate_lattice(lattice)?;
    if !(end_time >= 0.0 && end_time.is_finite()) {
        return arg_err(format!("end time must be finite and >= 0 (got {end_time})"));
    }
    Ok(())
}

fn gather(states: &[i8], ids: &[u32], buf: &mut Vec<i8>) {
    buf.clear();
    buf.extend(ids.iter().map(|&i| states[i as usize]));
}

/// The standard serial procedure: advance a single global stream by
/// `Exp(rate * N)`, pick a uniform cell, attempt the update. Draw order per
/// arrival is (time, cell, flip).
pub fn run_standard(
    model: &Model,
    lattice: &Lattice,
    rate: f64,
    seed: u64,
    end_time: f64,
    opts: &SerialOptions,
) -> Result<Trajectory> {
    validate_common(model, lattice, end_time)?;
    if !(rate > 0.0 && rate.is_finite()) {
        return arg_err(format!("rate must be positive (got {rate})"));
    }
    let n = lattice.cell_count();
    let deps = dependency_table(model, lattice);
    let mut states = initial_states(model, lattice, seed, opts.init);
    let mut stream = Stream::new(seed, StreamId::scalar());
    let mut rec = Recorder::new(opts.record_events);
    let mut nbrs = Vec::new();
    let mut t = 0.0f64;
    let mut count = 0u64;
    let budget = opts.max_events.unwrap_or(u64::MAX);
    loop {
        if count >= budget {
            break;
        }
        t -= stream.next_uniform().ln() / (rate * n as f64);
        if t >= end_time {
            break;
        }
        let cell = ((stream.next_uniform() * n as f64) as usize).min(n - 1);
        gather(&states, &deps[cell], &mut nbrs);
        let r = model.needs_flip_draw().then(|| stream.next_uniform());
        let old = states[cell];
        let new = model.next_state(old, &nbrs, r);
        states[cell] = new;
        rec.push(Event { time: t, cell: cell as u32, old_state: old, new_state: new });
        count += 1;
    }
    Ok(rec.finish(states, RunStats::default()))
}

/// Event-list simulation of per-cell arrival streams: always processes the
/// globally minimal next-arrival time. With a fixed seed this trajectory is
/// the reference every correct general parallel run must equal, whatever the
/// partition or worker count.
pub fn run_eventlist(
    model: &Model,
    lattice: &Lattice,
    law: &ArrivalLaw,
    seed: u64,
    end_time: f64,
    opts: &SerialOptions,
) -> Result<Trajectory> {
    validate_common(model, lattice, end_time)?;
    let n = lattice.cell_count();
    let deps = dependency_table(model, lattice);
    let mut states = initial_states(model, lattice, seed, opts.init);
    let mut streams: Vec<Stream> = (0..n).map(|c| Stream::new(seed, StreamId::cell(c))).collect();
    let mut arrival = vec![0.0f64; n];
    let mut heap: BinaryHeap<Reverse<(u64, u32)>> = BinaryHeap::with_capacity(n);
    for c in 0..n {
        let t = law.next_arrival(0.0, streams[c].next_uniform())?;
        arrival[c] = t;
        heap.push(Reverse((t.to_bits(), c as u32)));
    }
    let mut rec = Recorder::new(opts.record_events);
    let mut nbrs = Vec::new();
    let budget = opts.max_events.unwrap_or(u64::MAX);
    let mut count = 0u64;
    while let Some(&Reverse((bits, cell))) = heap.peek() {
        let t = f64::from_bits(bits);
        if t >= end_time || count >= budget {
            break;
        }
        heap.pop();
        let cell = cell as usize;
        // Condition (ii): no two neighboring arrivals may coincide.
        for &nb in &deps[cell] {
            if arrival[nb as usize] == t {
                return Err(SimError::TieFault { time: t, cell_a: cell as u32, cell_b: nb });
            }
        }
        gather(&states, &deps[cell], &mut nbrs);
        let r = model.needs_flip_draw().then(|| streams[cell].next_uniform());
        let old = states[cell];
        let new = model.next_state(old, &nbrs, r);
        states[cell] = new;
        rec.push(Event { time: t, cell: cell as u32, old_state: old, new_state: new });
        count += 1;
        let next = law.next_arrival(t, streams[cell].next_uniform())?;
        arrival[cell] = next;
        heap.push(Reverse((next.to_bits(), cell as u32)));
    }
    Ok(rec.finish(states, RunStats::default()))
}

/// Serial rejection-free simulation under Poisson asynchrony: every recorded
/// event is a realized state change, and time advances by
/// `Exp(rate * total_weight)` per step. A configuration with zero total
/// weight is frozen; the run jumps to the end time.
pub fn run_bkl(
    model: &Model,
    lattice: &Lattice,
    rate: f64,
    seed: u64,
    end_time: f64,
    opts: &SerialOptions,
) -> Result<Trajectory> {
    validate_common(model, lattice, end_time)?;
    if !(rate > 0.0 && rate.is_finite()) {
        return arg_err(format!("rate must be positive (got {rate})"));
    }
    let n = lattice.cell_count();
    let deps = dependency_table(model, lattice);
    let mut states = initial_states(model, lattice, seed, opts.init);
    let class_set = ClassSet::for_model(model);
    let prob_of = |states: &[i8], nbrs: &mut Vec<i8>, c: usize, deps: &[Vec<u32>]| {
        gather(states, &deps[c], nbrs);
        model.flip_probability(states[c], nbrs)
    };
    let mut classes = {
        let mut buf = Vec::new();
        ClassPartition::new(class_set, n, |_| false, |c| prob_of(&states, &mut buf, c, &deps))
    };
    let mut stream = Stream::new(seed, StreamId::scalar());
    let mut rec = Recorder::new(opts.record_events);
    let mut t = 0.0f64;
    let budget = opts.max_events.unwrap_or(u64::MAX);
    let mut count = 0u64;
    loop {
        if count >= budget {
            break;
        }
        let weight = classes.total_weight();
        if weight == 0.0 {
            break; // frozen; nothing can change before end_time
        }
        let r1 = stream.next_uniform();
        let r2 = stream.next_uniform();
        let Selection::Kernel { slot, .. } = classes.select(r1, r2) else {
            unreachable!("serial variant tracks every cell");
        };
        t = bkl::advance_time(t, rate, weight, stream.next_uniform())?;
        if t >= end_time {
            break;
        }
        let cell = slot as usize;
        let old = states[cell];
        let new = model.flipped(old);
        states[cell] = new;
        rec.push(Event { time: t, cell: cell as u32, old_state: old, new_state: new });
        count += 1;
        // Membership updates for the flipped cell and everyone who reads it.
        let mut buf = Vec::new();
        classes.reclassify(cell, prob_of(&states, &mut buf, cell, &deps));
        for &nb in &deps[cell] {
            classes.reclassify(nb as usize, prob_of(&states, &mut buf, nb as usize, &deps));
        }
    }
    Ok(rec.finish(states, RunStats::default()))
}
