//! Round-structured one-cell-per-PE engine.
//!
//! Every round, each active cell tests `t(c) <= min t(neighbors)`; eligible
//! cells compute their new state and next arrival into private storage, a
//! barrier separates compute from publish, a second barrier separates
//! publish from the next round's reads. Because simultaneous neighbor
//! updates read the states published in the previous round (the
//! just-before-t values), the engine stays correct even when arrival times
//! tie — under the fixed law it degenerates into an ordinary synchronous
//! cellular automaton. With a continuous law and no ties, the committed
//! events equal the asynchronous engines' trajectory.

use crate::arrival::ArrivalLaw;
use crate::engine::dependency_table;
use crate::engine::parallel::ParallelConfig;
use crate::error::{arg_err, Result};
use crate::models::{initial_states, Model};
use crate::streams::{Stream, StreamId};
use crate::topology::Lattice;
use crate::trajectory::{merge_and_hash, Event, RunStats, Trajectory};

use std::sync::atomic::{AtomicI8, AtomicU64, Ordering};
use std::sync::Barrier;

struct WorkerOutput {
    events: Vec<Event>,
    /// Per round: (own committed updates, own cells already past end_time).
    rounds: Vec<(u32, u32)>,
}

pub fn run_sync_one_cell(
    cfg: &ParallelConfig,
    model: &Model,
    lattice: &Lattice,
    law: &ArrivalLaw,
    seed: u64,
) -> Result<Trajectory> {
    model.validate_lattice(lattice)?;
    if cfg.workers == 0 {
        return arg_err("need at least one worker");
    }
    if !(cfg.end_time >= 0.0 && cfg.end_time.is_finite()) {
        return arg_err(format!("end time must be finite and >= 0 (got {})", cfg.end_time));
    }
    if cfg.snapshots.is_some() {
        return arg_err("snapshot output is an aggregated-engine feature");
    }
    if cfg.bkl {
        return arg_err("rejection-free selection applies to the aggregated Poisson engine");
    }
    let n = lattice.cell_count();
    let deps = dependency_table(model, lattice);
    let states: Vec<AtomicI8> =
        initial_states(model, lattice, seed, cfg.init).into_iter().map(AtomicI8::new).collect();
    let times: Vec<AtomicU64> = (0..n).map(|_| AtomicU64::new(0)).collect();
    let mut streams: Vec<Option<Stream>> = Vec::with_capacity(n);
    for (c, slot) in times.iter().enumerate() {
        let mut s = Stream::new(seed, StreamId::cell(c));
        let t0 = law.next_arrival(0.0, s.next_uniform())?;
        slot.store(t0.to_bits(), Ordering::Relaxed);
        streams.push(Some(s));
    }

    let workers = cfg.workers.min(n);
    let barrier = Barrier::new(workers);
    let end_time = cfg.end_time;
    let chunk = n.div_ceil(workers);
    let record = cfg.record_events;

    let outputs: Vec<WorkerOutput> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers {
            let lo = w * chunk;
            let hi = ((w + 1) * chunk).min(n);
            let mut owned: Vec<(usize, Stream)> =
                (lo..hi).map(|c| (c, streams[c].take().expect("each cell owned once"))).collect();
            let (states, times, deps, barrier) = (&states, &times, &deps, &barrier);
            handles.push(scope.spawn(move || {
                let mut out = WorkerOutput { events: Vec::new(), rounds: Vec::new() };
                let mut staged: Vec<(usize, f64, i8, i8, f64)> = Vec::new();
                let mut nbrs: Vec<i8> = Vec::new();
                loop {
                    staged.clear();
                    let mut own_finished = 0u32;
                    for (c, stream) in owned.iter_mut() {
                        let c = *c;
                        let t = f64::from_bits(times[c].load(Ordering::Relaxed));
                        if t >= end_time {
                            own_finished += 1;
                            continue;
                        }
                        let eligible = deps[c].iter().all(|&nb| {
                            t <= f64::from_bits(times[nb as usize].load(Ordering::Relaxed))
                        });
                        if !eligible {
                            continue;
                        }
                        nbrs.clear();
                        nbrs.extend(
                            deps[c].iter().map(|&nb| states[nb as usize].load(Ordering::Relaxed)),
                        );
                        let old = states[c].load(Ordering::Relaxed);
                        let r = model.needs_flip_draw().then(|| stream.next_uniform());
                        let new = model.next_state(old, &nbrs, r);
                        // Streams always yield draws in (0,1) and times stay
                        // finite, so the law cannot reject them.
                        let next_t = law
                            .next_arrival(t, stream.next_uniform())
                            .expect("stream draws satisfy the law's domain");
                        staged.push((c, t, old, new, next_t));
                    }
                    barrier.wait(); // barrier 1: all reads done
                    for &(c, t, old, new, next_t) in &staged {
                        if new != old {
                            states[c].store(new, Ordering::Relaxed);
                        }
                        times[c].store(next_t.to_bits(), Ordering::Relaxed);
                        out.events.push(Event {
                            time: t,
                            cell: c as u32,
                            old_state: old,
                            new_state: new,
                        });
                    }
                    out.rounds.push((staged.len() as u32, own_finished));
                    barrier.wait(); // barrier 2: all writes visible
                    // Same published data everywhere: every worker reaches
                    // the same termination decision without coordination.
                    let all_done = (0..n)
                        .all(|c| f64::from_bits(times[c].load(Ordering::Relaxed)) >= end_time);
                    if all_done {
                        return out;
                    }
                }
            }));
        }
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });

    let total_rounds = outputs[0].rounds.len();
    let mut active_rounds = 0u64;
    let mut eligible_sum = 0.0;
    for round in 0..total_rounds {
        let updates: u32 = outputs.iter().map(|o| o.rounds[round].0).sum();
        let finished: u32 = outputs.iter().map(|o| o.rounds[round].1).sum();
        if finished == 0 {
            active_rounds += 1;
            eligible_sum += f64::from(updates) / n as f64;
        }
    }
    let stats = RunStats {
        rounds: total_rounds as u64,
        eligible_fraction: (active_rounds > 0).then(|| eligible_sum / active_rounds as f64),
        ..RunStats::default()
    };
    let per_pe: Vec<Vec<Event>> = outputs.into_iter().map(|o| o.events).collect();
    let (events, hash, count, flips) = merge_and_hash(per_pe, record);
    let mut stats = stats;
    stats.flips = flips;
    let final_state: Vec<i8> = states.iter().map(|s| s.load(Ordering::Relaxed)).collect();
    Ok(Trajectory { events, event_count: count, hash, final_state, stats })
}
