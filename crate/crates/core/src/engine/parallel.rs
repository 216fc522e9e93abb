//! Conservative parallel engines.
//!
//! Logical PEs (one per subarray) run concurrently on a fixed pool of worker
//! threads; a blocked PE yields its worker instead of spinning. Each PE
//! publishes its local time before waiting and commits an event only once
//! every PE in the selected cell's waiting set has published an equal or
//! later time. Published times are monotone, so stale reads can only delay
//! progress, never corrupt it, and the PE holding the globally minimal time
//! can always advance — the discipline is deadlock-free.
//!
//! The general engine drives per-cell arrival streams and reproduces the
//! serial event-list trajectory exactly, for any partition and worker count.
//! The Poisson engine drives one cumulative per-PE stream (optionally with
//! rejection-free kernel selection) and is deterministic per (seed,
//! partition) only.

use crate::arrival::{cumulative_next_arrival, ArrivalLaw};
use crate::bkl::{self, ClassPartition, ClassSet, Selection};
use crate::engine::dependency_table;
use crate::error::{arg_err, Result, SimError};
use crate::models::{initial_states, InitKind, Model};
use crate::snapshots::{pattern_path, write_pattern, FrameRing, SnapshotConfig};
use crate::streams::{Stream, StreamId};
use crate::topology::{Lattice, Partition};
use crate::trajectory::{merge_and_hash, Event, RunStats, Trajectory};

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicBool, AtomicI8, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct ParallelConfig {
    /// Worker threads; logical PEs are multiplexed onto them round-robin.
    pub workers: usize,
    pub end_time: f64,
    pub init: InitKind,
    pub record_events: bool,
    /// Cap on how far a PE's event time may run ahead of the slowest
    /// published local time before it must wait.
    pub lag_bound: Option<f64>,
    pub snapshots: Option<SnapshotConfig>,
    /// Seed for injected random scheduling delays (stress testing the
    /// claim that trajectories are independent of executional timing).
    pub jitter_seed: Option<u64>,
    /// Run the per-event invariant checks (local-time ordering, published
    /// spread tracking).
    pub check_invariants: bool,
    /// Rejection-free kernel selection in the aggregated Poisson engine.
    pub bkl: bool,
    /// Re-derive every kernel class after each event (modified-BKL audit).
    pub audit_classes: bool,
}

impl ParallelConfig {
    pub fn new(workers: usize, end_time: f64) -> ParallelConfig {
        ParallelConfig {
            workers,
            end_time,
            init: InitKind::Random,
            record_events: true,
            lag_bound: None,
            snapshots: None,
            jitter_seed: None,
            check_invariants: false,
            bkl: false,
            audit_classes: false,
        }
    }
}

/// Outcome of one scheduling attempt at a logical PE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Progress,
    Blocked,
    Done,
}

/// Conservative wait decision against the observed (possibly stale)
/// published times of the waiting set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaitDecision {
    Proceed,
    Block,
    /// An observed time equals the local event time: condition (ii) is
    /// violated and the general engines must fault.
    Tie,
}

pub fn wait_until(local: f64, observed: impl IntoIterator<Item = f64>) -> WaitDecision {
    let mut tie = false;
    for t in observed {
        if t < local {
            return WaitDecision::Block;
        }
        if t == local {
            tie = true;
        }
    }
    if tie {
        WaitDecision::Tie
    } else {
        WaitDecision::Proceed
    }
}

struct Shared<'a> {
    states: &'a [AtomicI8],
    /// Published local-time bits per PE (f64 to_bits; all times >= 0).
    times: &'a [AtomicU64],
    done: &'a [AtomicBool],
    abort: &'a AtomicBool,
    fault: &'a Mutex<Option<SimError>>,
    blocked_polls: &'a AtomicU64,
    spread_bits: &'a AtomicU64,
    ring: Option<&'a FrameRing>,
    end_time: f64,
    lag_bound: Option<f64>,
    track_spread: bool,
    check: bool,
}

impl Shared<'_> {
    fn fail(&self, e: SimError) {
        let mut slot = self.fault.lock().unwrap();
        if slot.is_none() {
            *slot = Some(e);
        }
        self.abort.store(true, Ordering::Release);
    }

    fn publish(&self, pe: usize, t: f64) {
        self.times[pe].store(t.to_bits(), Ordering::Release);
        if self.track_spread {
            self.observe_spread();
        }
    }

    /// Spread of published times across PEs still processing events.
    fn observe_spread(&self) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, t) in self.times.iter().enumerate() {
            if self.done[i].load(Ordering::Relaxed) {
                continue;
            }
            let v = f64::from_bits(t.load(Ordering::Relaxed));
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi > lo {
            self.spread_bits.fetch_max((hi - lo).to_bits(), Ordering::Relaxed);
        }
    }

    fn lag_blocked(&self, t: f64) -> bool {
        let Some(bound) = self.lag_bound else { return false };
        let mut lo = f64::INFINITY;
        for time in self.times {
            lo = lo.min(f64::from_bits(time.load(Ordering::Relaxed)));
        }
        t - lo > bound
    }

    fn neighbor_times<'b>(
        &'b self,
        wset: &'b [u32],
    ) -> impl Iterator<Item = f64> + 'b {
        wset.iter().map(|&w| f64::from_bits(self.times[w as usize].load(Ordering::Acquire)))
    }
}

/// Stores all snapshots due strictly before `limit` (and never beyond the
/// run's final snapshot index). False means a frame was unavailable and the
/// caller must retry with the same `snap_k`.
fn flush_snapshots(
    ring: &FrameRing,
    snap_k: &mut u64,
    limit: f64,
    own_cells: &[u32],
    states: &[AtomicI8],
) -> bool {
    while *snap_k <= ring.k_max() && (*snap_k as f64) * ring.interval() < limit {
        if !ring.try_store(*snap_k, own_cells, states) {
            return false;
        }
        *snap_k += 1;
    }
    true
}

/// Cooperative multiplexing of logical PEs over one worker thread: each PE
/// runs until it blocks, then the worker moves on. Backoff escalates from
/// spinning to yielding to short sleeps only when a full pass over every
/// owned PE made no progress (all of them are waiting on other workers).
fn drive<P>(
    shared: &Shared<'_>,
    pes: &mut [P],
    mut jitter: Option<Stream>,
    mut step: impl FnMut(&mut P, &Shared<'_>) -> Result<Step>,
) {
    let mut finished = vec![false; pes.len()];
    let mut idle_passes = 0u32;
    loop {
        if shared.abort.load(Ordering::Acquire) {
            return;
        }
        let mut progressed = false;
        let mut all_done = true;
        for (i, pe) in pes.iter_mut().enumerate() {
            if finished[i] {
                continue;
            }
            all_done = false;
            if let Some(j) = jitter.as_mut() {
                let u = j.next_uniform();
                if u < 1.0 / 16.0 {
                    std::thread::sleep(Duration::from_micros((u * 16.0 * 120.0) as u64));
                }
            }
            loop {
                if shared.abort.load(Ordering::Relaxed) {
                    return;
                }
                match step(pe, shared) {
                    Ok(Step::Progress) => progressed = true,
                    Ok(Step::Blocked) => {
                        shared.blocked_polls.fetch_add(1, Ordering::Relaxed);
                        break;
                    }
                    Ok(Step::Done) => {
                        finished[i] = true;
                        progressed = true;
                        break;
                    }
                    Err(e) => {
                        shared.fail(e);
                        return;
                    }
                }
            }
        }
        if all_done {
            return;
        }
        if progressed {
            idle_passes = 0;
        } else {
            idle_passes += 1;
            if idle_passes < 16 {
                std::hint::spin_loop();
            } else if idle_passes < 64 {
                std::thread::yield_now();
            } else {
                std::thread::sleep(Duration::from_micros(50));
            }
        }
    }
}

fn round_robin<P>(mut pes: Vec<P>, workers: usize) -> Vec<Vec<P>> {
    let mut bins: Vec<Vec<P>> = (0..workers).map(|_| Vec::new()).collect();
    let mut i = 0;
    while let Some(pe) = pes.pop() {
        bins[i % workers].push(pe);
        i += 1;
    }
    bins
}

fn drain_frames(ring: &FrameRing, lattice: &Lattice, out_dir: &std::path::Path, shared: &Shared<'_>) {
    for k in 0..=ring.k_max() {
        loop {
            if shared.abort.load(Ordering::Acquire) {
                return;
            }
            if let Some(image) = ring.try_drain(k) {
                let t = k as f64 * ring.interval();
                if let Err(e) = write_pattern(&image, lattice, t, &pattern_path(out_dir, k)) {
                    shared.fail(e);
                    return;
                }
                break;
            }
            std::thread::sleep(Duration::from_micros(200));
        }
    }
}

fn validate_parallel(
    cfg: &ParallelConfig,
    model: &Model,
    partition: &Partition,
) -> Result<()> {
    model.validate_lattice(partition.lattice())?;
    if cfg.workers == 0 {
        return arg_err("need at least one worker");
    }
    if !(cfg.end_time >= 0.0 && cfg.end_time.is_finite()) {
        return arg_err(format!("end time must be finite and >= 0 (got {})", cfg.end_time));
    }
    if partition.degree() < model.dependency_degree() {
        return arg_err(format!(
            "partition degree {} does not cover the model's neighborhood degree {}",
            partition.degree(),
            model.dependency_degree()
        ));
    }
    if let Some(b) = cfg.lag_bound {
        if !b.is_finite() || b <= 0.0 {
            return arg_err(format!("lag bound must be positive (got {b})"));
        }
    }
    Ok(())
}

/// Per-PE state of the general (per-cell-stream) engine.
struct GeneralPe {
    id: usize,
    cells: Vec<u32>,
    streams: Vec<Stream>,
    heap: BinaryHeap<Reverse<(u64, u32)>>,
    arrivals: Vec<f64>,
    deps: Vec<Vec<u32>>,
    wsets: Vec<Box<[u32]>>,
    published: f64,
    snap_k: u64,
    events: Vec<Event>,
    nbr_buf: Vec<i8>,
}

#[derive(Clone, Copy)]
struct GeneralCtx<'a> {
    model: &'a Model,
    law: &'a ArrivalLaw,
    /// cell id -> (owning PE, local slot).
    owner: &'a [(u32, u32)],
}

fn step_general(pe: &mut GeneralPe, sh: &Shared<'_>, ctx: &GeneralCtx<'_>) -> Result<Step> {
    let &Reverse((bits, li)) = pe.heap.peek().expect("every cell always has a pending arrival");
    let t = f64::from_bits(bits);
    let finishing = t >= sh.end_time;

    // Output discipline first: local time may not pass K*dt before the
    // image for K is stored (this is what bounds the time spread).
    if let Some(ring) = sh.ring {
        let limit = if finishing { f64::INFINITY } else { t };
        if !flush_snapshots(ring, &mut pe.snap_k, limit, &pe.cells, sh.states) {
            return Ok(Step::Blocked);
        }
    }
    if finishing {
        sh.done[pe.id].store(true, Ordering::Relaxed);
        sh.publish(pe.id, t);
        return Ok(Step::Done);
    }
    if pe.published != t {
        debug_assert!(t > pe.published, "published local time may not decrease");
        pe.published = t;
        sh.publish(pe.id, t);
        if sh.check {
            // Every cell's next arrival stays at or above the subarray's
            // local time.
            if let Some(&bad) = pe.arrivals.iter().find(|&&a| a < t) {
                return arg_err(format!(
                    "arrival time {bad} fell below the local time {t} of PE {}",
                    pe.id
                ));
            }
        }
    }
    if sh.lag_blocked(t) {
        return Ok(Step::Blocked);
    }
    let l = li as usize;
    match wait_until(t, sh.neighbor_times(&pe.wsets[l])) {
        WaitDecision::Block => return Ok(Step::Blocked),
        WaitDecision::Tie => {
            // A neighbor PE's published minimum equals our event time; under
            // a continuous law this happens with probability zero and is
            // treated as a condition-(ii) fault.
            let cell = pe.cells[l];
            let other = pe.deps[l]
                .iter()
                .copied()
                .find(|&nb| pe.wsets[l].contains(&(ctx.owner[nb as usize].0)))
                .unwrap_or(cell);
            return Err(SimError::TieFault { time: t, cell_a: cell, cell_b: other });
        }
        WaitDecision::Proceed => {}
    }
    // Ties inside the subarray are visible directly.
    for &nb in &pe.deps[l] {
        let (owner_pe, slot) = ctx.owner[nb as usize];
        if owner_pe as usize == pe.id && pe.arrivals[slot as usize] == t {
            return Err(SimError::TieFault { time: t, cell_a: pe.cells[l], cell_b: nb });
        }
    }

    // Commit: the update uses the neighbor states just before t.
    pe.heap.pop();
    let cell = pe.cells[l] as usize;
    pe.nbr_buf.clear();
    pe.nbr_buf.extend(pe.deps[l].iter().map(|&nb| sh.states[nb as usize].load(Ordering::Relaxed)));
    let old = sh.states[cell].load(Ordering::Relaxed);
    let r = ctx.model.needs_flip_draw().then(|| pe.streams[l].next_uniform());
    let new = ctx.model.next_state(old, &pe.nbr_buf, r);
    if new != old {
        sh.states[cell].store(new, Ordering::Relaxed);
    }
    pe.events.push(Event { time: t, cell: cell as u32, old_state: old, new_state: new });
    let next = ctx.law.next_arrival(t, pe.streams[l].next_uniform())?;
    pe.arrivals[l] = next;
    pe.heap.push(Reverse((next.to_bits(), li)));
    Ok(Step::Progress)
}

/// Runs the aggregated general-asynchrony engine. The trajectory equals the
/// serial event-list oracle and is invariant under the partition shape and
/// the worker count.
pub fn run_aggregated_general(
    cfg: &ParallelConfig,
    model: &Model,
    partition: &Partition,
    law: &ArrivalLaw,
    seed: u64,
) -> Result<Trajectory> {
    validate_parallel(cfg, model, partition)?;
    if cfg.bkl {
        return arg_err("rejection-free selection applies to the aggregated Poisson engine");
    }
    let lattice = *partition.lattice();
    let n = lattice.cell_count();
    let n_pes = partition.subarray_count();

    let states: Vec<AtomicI8> =
        initial_states(model, &lattice, seed, cfg.init).into_iter().map(AtomicI8::new).collect();
    let deps_global = dependency_table(model, &lattice);
    let mut owner = vec![(0u32, 0u32); n];
    let mut pes = Vec::with_capacity(n_pes);
    for sub in 0..n_pes {
        let cells: Vec<u32> = partition.cells_of(sub)?.into_iter().map(|c| c as u32).collect();
        for (slot, &c) in cells.iter().enumerate() {
            owner[c as usize] = (sub as u32, slot as u32);
        }
        let mut streams = Vec::with_capacity(cells.len());
        let mut arrivals = Vec::with_capacity(cells.len());
        let mut heap = BinaryHeap::with_capacity(cells.len());
        let mut deps = Vec::with_capacity(cells.len());
        let mut wsets = Vec::with_capacity(cells.len());
        for (slot, &c) in cells.iter().enumerate() {
            let mut s = Stream::new(seed, StreamId::cell(c as usize));
            let t0 = law.next_arrival(0.0, s.next_uniform())?;
            streams.push(s);
            arrivals.push(t0);
            heap.push(Reverse((t0.to_bits(), slot as u32)));
            deps.push(deps_global[c as usize].clone());
            wsets.push(
                partition.w_set(c as usize)?.into_iter().map(|w| w as u32).collect::<Box<[u32]>>(),
            );
        }
        pes.push(GeneralPe {
            id: sub,
            cells,
            streams,
            heap,
            arrivals,
            deps,
            wsets,
            published: -1.0,
            snap_k: 0,
            events: Vec::new(),
            nbr_buf: Vec::new(),
        });
    }

    let ctx = GeneralCtx { model, law, owner: &owner };
    let (per_pe_events, stats, final_state) =
        execute(cfg, &lattice, n_pes, states, pes, move |pe, sh| step_general(pe, sh, &ctx))?;
    finish_run(cfg, per_pe_events, stats, final_state)
}

/// One PE of the one-cell-per-PE asynchronous algorithm is one cell; this is
/// the aggregated engine with subarray side 1, where t(c) doubles as the
/// cell's local time.
pub fn run_async_one_cell(
    cfg: &ParallelConfig,
    model: &Model,
    lattice: &Lattice,
    law: &ArrivalLaw,
    seed: u64,
) -> Result<Trajectory> {
    let partition = Partition::new(*lattice, 1, model.dependency_degree())?;
    run_aggregated_general(cfg, model, &partition, law, seed)
}

enum PendSel {
    /// Standard mode: uniformly selected cell (local slot).
    Uniform(u32),
    /// Modified BKL: kernel selection, flips unconditionally.
    Kernel(u32),
    /// Modified BKL: fixed boundary-class selection, standard rule applies.
    Boundary(u32),
    /// The next cumulative arrival falls past the end time.
    Finish,
}

struct Pending {
    t: f64,
    sel: PendSel,
}

struct BklState {
    classes: ClassPartition,
    /// local slot -> kernel slots whose class depends on that cell's state.
    affects: Vec<Vec<u32>>,
}

struct PoissonPe {
    id: usize,
    cells: Vec<u32>,
    stream: Stream,
    committed: f64,
    published: f64,
    pending: Option<Pending>,
    snap_k: u64,
    events: Vec<Event>,
    deps: Vec<Vec<u32>>,
    wsets: Vec<Box<[u32]>>,
    nbr_buf: Vec<i8>,
    bkl: Option<BklState>,
    kernel_selections: u64,
    boundary_selections: u64,
    kernel_rejections: u64,
}

#[derive(Clone, Copy)]
struct PoissonCtx<'a> {
    model: &'a Model,
    rate: f64,
    audit: bool,
}

impl PoissonPe {
    fn flip_prob(&mut self, slot: usize, sh: &Shared<'_>, model: &Model) -> f64 {
        self.nbr_buf.clear();
        self.nbr_buf.extend(
            self.deps[slot].iter().map(|&nb| sh.states[nb as usize].load(Ordering::Relaxed)),
        );
        let own = sh.states[self.cells[slot] as usize].load(Ordering::Relaxed);
        model.flip_probability(own, &self.nbr_buf)
    }

    /// Step (d): reclassify the flipped cell and the kernel cells that read
    /// it. All of them live in this subarray, so no remote state is touched.
    fn update_memberships(&mut self, slot: usize, sh: &Shared<'_>, model: &Model) {
        let affected = std::mem::take(&mut self.bkl.as_mut().unwrap().affects[slot]);
        for &k in &affected {
            let p = self.flip_prob(k as usize, sh, model);
            self.bkl.as_mut().unwrap().classes.reclassify(k as usize, p);
        }
        self.bkl.as_mut().unwrap().affects[slot] = affected;
    }
}

fn step_poisson(pe: &mut PoissonPe, sh: &Shared<'_>, ctx: &PoissonCtx<'_>) -> Result<Step> {
    if pe.pending.is_none() {
        let (t_next, sel) = match &pe.bkl {
            None => {
                let t = cumulative_next_arrival(
                    ctx.rate,
                    pe.cells.len(),
                    pe.committed,
                    pe.stream.next_uniform(),
                )?;
                if t >= sh.end_time {
                    (t, PendSel::Finish)
                } else {
                    let k = pe.cells.len();
                    let slot = ((pe.stream.next_uniform() * k as f64) as usize).min(k - 1);
                    (t, PendSel::Uniform(slot as u32))
                }
            }
            Some(b) => {
                let weight = b.classes.total_weight();
                if weight == 0.0 {
                    // Frozen subarray: nothing changes before the end time.
                    (sh.end_time, PendSel::Finish)
                } else {
                    let t =
                        bkl::advance_time(pe.committed, ctx.rate, weight, pe.stream.next_uniform())?;
                    if t >= sh.end_time {
                        (t, PendSel::Finish)
                    } else {
                        let r1 = pe.stream.next_uniform();
                        let r2 = pe.stream.next_uniform();
                        match pe.bkl.as_ref().unwrap().classes.select(r1, r2) {
                            Selection::Boundary { slot } => (t, PendSel::Boundary(slot)),
                            Selection::Kernel { slot, .. } => (t, PendSel::Kernel(slot)),
                        }
                    }
                }
            }
        };
        pe.pending = Some(Pending { t: t_next, sel });
    }

    let t = pe.pending.as_ref().unwrap().t;
    let finishing = matches!(pe.pending.as_ref().unwrap().sel, PendSel::Finish);
    if let Some(ring) = sh.ring {
        let limit = if finishing { f64::INFINITY } else { t };
        if !flush_snapshots(ring, &mut pe.snap_k, limit, &pe.cells, sh.states) {
            return Ok(Step::Blocked);
        }
    }
    if finishing {
        sh.done[pe.id].store(true, Ordering::Relaxed);
        sh.publish(pe.id, t);
        return Ok(Step::Done);
    }
    if pe.published != t {
        debug_assert!(t > pe.published);
        pe.published = t;
        sh.publish(pe.id, t);
    }
    if sh.lag_blocked(t) {
        return Ok(Step::Blocked);
    }
    let slot = match pe.pending.as_ref().unwrap().sel {
        PendSel::Uniform(s) | PendSel::Boundary(s) => {
            // Equal published times pass the wait here: the Poisson law makes
            // exact coincidence a probability-zero event and this engine's
            // uniqueness guarantee is per-partition anyway.
            if sh
                .neighbor_times(&pe.wsets[s as usize])
                .any(|tw| tw < t)
            {
                return Ok(Step::Blocked);
            }
            s as usize
        }
        PendSel::Kernel(s) => s as usize, // empty waiting set by construction
        PendSel::Finish => unreachable!(),
    };

    let sel = &pe.pending.as_ref().unwrap().sel;
    let cell = pe.cells[slot] as usize;
    let old = sh.states[cell].load(Ordering::Relaxed);
    match sel {
        PendSel::Uniform(_) => {
            pe.nbr_buf.clear();
            pe.nbr_buf.extend(
                pe.deps[slot].iter().map(|&nb| sh.states[nb as usize].load(Ordering::Relaxed)),
            );
            let r = ctx.model.needs_flip_draw().then(|| pe.stream.next_uniform());
            let new = ctx.model.next_state(old, &pe.nbr_buf, r);
            if new != old {
                sh.states[cell].store(new, Ordering::Relaxed);
            }
            pe.events.push(Event { time: t, cell: cell as u32, old_state: old, new_state: new });
        }
        PendSel::Kernel(_) => {
            pe.kernel_selections += 1;
            let new = ctx.model.flipped(old);
            if new == old {
                pe.kernel_rejections += 1;
            }
            sh.states[cell].store(new, Ordering::Relaxed);
            pe.events.push(Event { time: t, cell: cell as u32, old_state: old, new_state: new });
            pe.update_memberships(slot, sh, ctx.model);
        }
        PendSel::Boundary(_) => {
            pe.boundary_selections += 1;
            let p = pe.flip_prob(slot, sh, ctx.model);
            let r = pe.stream.next_uniform();
            if r < p {
                let new = ctx.model.flipped(old);
                sh.states[cell].store(new, Ordering::Relaxed);
                pe.events
                    .push(Event { time: t, cell: cell as u32, old_state: old, new_state: new });
                pe.update_memberships(slot, sh, ctx.model);
            }
        }
        PendSel::Finish => unreachable!(),
    }
    if ctx.audit && pe.bkl.is_some() {
        let tracked: Vec<bool> = (0..pe.cells.len())
            .map(|s| pe.bkl.as_ref().unwrap().classes.class_of_slot(s).is_some())
            .collect();
        let mut probs = vec![-1.0; pe.cells.len()];
        for (s, &is_tracked) in tracked.iter().enumerate() {
            if is_tracked {
                probs[s] = pe.flip_prob(s, sh, ctx.model);
            }
        }
        if let Err(msg) = pe.bkl.as_ref().unwrap().classes.audit(|s| probs[s]) {
            return arg_err(format!("class audit failed on PE {}: {msg}", pe.id));
        }
    }
    pe.committed = t;
    pe.pending = None;
    Ok(Step::Progress)
}

/// Runs the aggregated Poisson-specialized engine: one cumulative arrival
/// stream per PE, a uniformly random cell per arrival. With `cfg.bkl` the
/// kernel runs the rejection-free procedure behind the fixed boundary class.
pub fn run_aggregated_poisson(
    cfg: &ParallelConfig,
    model: &Model,
    partition: &Partition,
    rate: f64,
    seed: u64,
) -> Result<Trajectory> {
    validate_parallel(cfg, model, partition)?;
    if !(rate > 0.0 && rate.is_finite()) {
        return arg_err(format!("rate must be positive (got {rate})"));
    }
    if cfg.bkl && partition.subarray_side() <= 2 * partition.degree() {
        return arg_err(format!(
            "subarray side {} leaves no kernel for degree {}",
            partition.subarray_side(),
            partition.degree()
        ));
    }
    let lattice = *partition.lattice();
    let n_pes = partition.subarray_count();
    let states: Vec<AtomicI8> =
        initial_states(model, &lattice, seed, cfg.init).into_iter().map(AtomicI8::new).collect();
    let deps_global = dependency_table(model, &lattice);

    let mut pes = Vec::with_capacity(n_pes);
    for sub in 0..n_pes {
        let cells: Vec<u32> = partition.cells_of(sub)?.into_iter().map(|c| c as u32).collect();
        let mut deps = Vec::with_capacity(cells.len());
        let mut wsets = Vec::with_capacity(cells.len());
        for &c in &cells {
            deps.push(deps_global[c as usize].clone());
            wsets.push(
                partition.w_set(c as usize)?.into_iter().map(|w| w as u32).collect::<Box<[u32]>>(),
            );
        }
        let bkl_state = if cfg.bkl {
            let local_of: std::collections::HashMap<u32, u32> =
                cells.iter().enumerate().map(|(i, &c)| (c, i as u32)).collect();
            let kernel: Vec<bool> = cells.iter().map(|&c| partition.is_kernel(c as usize)).collect();
            let mut affects: Vec<Vec<u32>> = vec![Vec::new(); cells.len()];
            for (slot, &c) in cells.iter().enumerate() {
                if kernel[slot] {
                    affects[slot].push(slot as u32);
                }
                for &nb in &deps_global[c as usize] {
                    if let Some(&nl) = local_of.get(&nb) {
                        if kernel[nl as usize] {
                            affects[slot].push(nl);
                        }
                    }
                }
            }
            let class_set = ClassSet::for_model(model);
            let mut prob_buf = Vec::new();
            let classes = ClassPartition::new(class_set, cells.len(), |s| !kernel[s], |s| {
                prob_buf.clear();
                prob_buf.extend(
                    deps_global[cells[s] as usize]
                        .iter()
                        .map(|&nb| states[nb as usize].load(Ordering::Relaxed)),
                );
                let own = states[cells[s] as usize].load(Ordering::Relaxed);
                model.flip_probability(own, &prob_buf)
            });
            Some(BklState { classes, affects })
        } else {
            None
        };
        pes.push(PoissonPe {
            id: sub,
            cells,
            stream: Stream::new(seed, StreamId::pe(sub)),
            committed: 0.0,
            published: -1.0,
            pending: None,
            snap_k: 0,
            events: Vec::new(),
            deps,
            wsets,
            nbr_buf: Vec::new(),
            bkl: bkl_state,
            kernel_selections: 0,
            boundary_selections: 0,
            kernel_rejections: 0,
        });
    }

    let ctx = PoissonCtx { model, rate, audit: cfg.audit_classes };
    let (outputs, mut stats, final_state) =
        execute(cfg, &lattice, n_pes, states, pes, move |pe, sh| step_poisson(pe, sh, &ctx))?;
    let mut per_pe_events = Vec::with_capacity(outputs.len());
    for (events, kernels, boundaries, rejections) in outputs {
        stats.kernel_selections += kernels;
        stats.boundary_selections += boundaries;
        stats.kernel_rejections += rejections;
        per_pe_events.push(events);
    }
    finish_run(cfg, per_pe_events, stats, final_state)
}

trait PeOutput {
    type Out;
    fn into_output(self) -> Self::Out;
}

impl PeOutput for GeneralPe {
    type Out = Vec<Event>;
    fn into_output(self) -> Vec<Event> {
        self.events
    }
}

impl PeOutput for PoissonPe {
    type Out = (Vec<Event>, u64, u64, u64);
    fn into_output(self) -> Self::Out {
        (self.events, self.kernel_selections, self.boundary_selections, self.kernel_rejections)
    }
}

/// Spins up the worker pool (plus the drain agent when snapshots are on),
/// runs every PE to completion, and gathers per-PE outputs.
fn execute<P: PeOutput + Send>(
    cfg: &ParallelConfig,
    lattice: &Lattice,
    n_pes: usize,
    states: Vec<AtomicI8>,
    pes: Vec<P>,
    step: impl FnMut(&mut P, &Shared<'_>) -> Result<Step> + Clone + Send,
) -> Result<(Vec<P::Out>, RunStats, Vec<i8>)> {
    let times: Vec<AtomicU64> = (0..n_pes).map(|_| AtomicU64::new(0)).collect();
    let done: Vec<AtomicBool> = (0..n_pes).map(|_| AtomicBool::new(false)).collect();
    let abort = AtomicBool::new(false);
    let fault = Mutex::new(None);
    let blocked_polls = AtomicU64::new(0);
    let spread_bits = AtomicU64::new(0);
    let ring = match &cfg.snapshots {
        Some(snap_cfg) => {
            std::fs::create_dir_all(&snap_cfg.out_dir)?;
            Some(FrameRing::new(snap_cfg, lattice.cell_count(), n_pes, cfg.end_time)?)
        }
        None => None,
    };
    let shared = Shared {
        states: &states,
        times: &times,
        done: &done,
        abort: &abort,
        fault: &fault,
        blocked_polls: &blocked_polls,
        spread_bits: &spread_bits,
        ring: ring.as_ref(),
        end_time: cfg.end_time,
        lag_bound: cfg.lag_bound,
        track_spread: cfg.check_invariants || cfg.snapshots.is_some(),
        check: cfg.check_invariants,
    };

    let bins = round_robin(pes, cfg.workers);
    let collected: Vec<P> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (w, mut bin) in bins.into_iter().enumerate() {
            let shared_ref = &shared;
            let jitter = cfg.jitter_seed.map(|s| Stream::new(s, StreamId::pe(w)));
            let mut step = step.clone();
            handles.push(scope.spawn(move || {
                drive(shared_ref, &mut bin, jitter, &mut step);
                bin
            }));
        }
        if let Some(ring_ref) = ring.as_ref() {
            let out_dir = cfg.snapshots.as_ref().unwrap().out_dir.clone();
            let shared_ref = &shared;
            scope.spawn(move || drain_frames(ring_ref, lattice, &out_dir, shared_ref));
        }
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });

    if let Some(e) = fault.lock().unwrap().take() {
        return Err(e);
    }
    let stats = RunStats {
        blocked_polls: blocked_polls.load(Ordering::Relaxed),
        max_time_spread: shared
            .track_spread
            .then(|| f64::from_bits(spread_bits.load(Ordering::Relaxed))),
        ..RunStats::default()
    };
    let final_state: Vec<i8> = states.iter().map(|s| s.load(Ordering::Relaxed)).collect();
    let outputs: Vec<P::Out> = collected.into_iter().map(PeOutput::into_output).collect();
    Ok((outputs, stats, final_state))
}

fn finish_run(
    cfg: &ParallelConfig,
    per_pe_events: Vec<Vec<Event>>,
    mut stats: RunStats,
    final_state: Vec<i8>,
) -> Result<Trajectory> {
    let (events, hash, count, flips) = merge_and_hash(per_pe_events, cfg.record_events);
    stats.flips = flips;
    Ok(Trajectory { events, event_count: count, hash, final_state, stats })
}
