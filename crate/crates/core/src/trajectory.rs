//! Committed event histories and their order-sensitive hash.
//!
//! A trajectory is the unit of exact equivalence between engines: two runs
//! agree iff their time-ordered `(time, cell, new-state)` sequences hash to
//! the same 64-bit value.

use crate::streams::mix64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub cell: u32,
    pub old_state: i8,
    pub new_state: i8,
}

impl Event {
    /// Total order on (time, cell). Times are finite and non-negative.
    pub fn order(a: &Event, b: &Event) -> std::cmp::Ordering {
        a.time.partial_cmp(&b.time).unwrap().then(a.cell.cmp(&b.cell))
    }
}

/// Counters collected during a run; engines fill the fields they own.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    /// Events that changed a state.
    pub flips: u64,
    /// Rounds executed (synchronous engine only).
    pub rounds: u64,
    /// Mean fraction of cells updated per full round, measured over rounds
    /// in which no cell had yet reached the end time (synchronous engine).
    pub eligible_fraction: Option<f64>,
    /// Times a waiting PE found a neighbor behind and had to retry.
    pub blocked_polls: u64,
    /// Kernel-class selections (modified BKL).
    pub kernel_selections: u64,
    /// Boundary-class selections (modified BKL).
    pub boundary_selections: u64,
    /// Kernel selections that failed to change a state; always 0.
    pub kernel_rejections: u64,
    /// Largest observed spread between published PE local times.
    pub max_time_spread: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Committed events in time order; empty when recording was disabled.
    pub events: Vec<Event>,
    pub event_count: u64,
    pub hash: u64,
    pub final_state: Vec<i8>,
    pub stats: RunStats,
}

const HASH_SEED: u64 = 0x9363_8269_51b4_4a10;

/// Rolling 64-bit hash over `(time bits, cell, new-state)` triples in
/// sequence order.
pub fn hash_events<'a>(events: impl IntoIterator<Item = &'a Event>) -> u64 {
    let mut h = HASH_SEED;
    for e in events {
        h = fold_event(h, e);
    }
    h
}

#[inline]
pub(crate) fn fold_event(h: u64, e: &Event) -> u64 {
    let h = mix64(h ^ e.time.to_bits());
    mix64(h ^ u64::from(e.cell) ^ (u64::from(e.new_state as u8) << 32))
}

/// Accumulates events from a single producer in commit order.
#[derive(Debug)]
pub(crate) struct Recorder {
    hash: u64,
    count: u64,
    flips: u64,
    events: Option<Vec<Event>>,
}

impl Recorder {
    pub fn new(record_events: bool) -> Recorder {
        Recorder { hash: HASH_SEED, count: 0, flips: 0, events: record_events.then(Vec::new) }
    }

    #[inline]
    pub fn push(&mut self, e: Event) {
        self.hash = fold_event(self.hash, &e);
        self.count += 1;
        if e.new_state != e.old_state {
            self.flips += 1;
        }
        if let Some(v) = &mut self.events {
            v.push(e);
        }
    }

    pub fn finish(self, final_state: Vec<i8>, stats: RunStats) -> Trajectory {
        let mut stats = stats;
        stats.flips = self.flips;
        Trajectory {
            events: self.events.unwrap_or_default(),
            event_count: self.count,
            hash: self.hash,
            final_state,
            stats,
        }
    }
}

/// Merges per-PE event logs into global time order and hashes the result.
/// Ties in time are broken by cell id; distinct cells never produce two
/// events at identical times under a continuous law.
pub(crate) fn merge_and_hash(
    per_pe: Vec<Vec<Event>>,
    record_events: bool,
) -> (Vec<Event>, u64, u64, u64) {
    let mut all: Vec<Event> = per_pe.into_iter().flatten().collect();
    all.sort_unstable_by(Event::order);
    let hash = hash_events(&all);
    let count = all.len() as u64;
    let flips = all.iter().filter(|e| e.new_state != e.old_state).count() as u64;
    if !record_events {
        all.clear();
        all.shrink_to_fit();
    }
    (all, hash, count, flips)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_order_sensitive() {
        let a = Event { time: 1.0, cell: 0, old_state: 1, new_state: -1 };
        let b = Event { time: 2.0, cell: 1, old_state: -1, new_state: 1 };
        assert_ne!(hash_events([&a, &b]), hash_events([&b, &a]));
    }

    #[test]
    fn hash_depends_on_time_bits_cell_and_state() {
        let base = Event { time: 1.0, cell: 0, old_state: 1, new_state: -1 };
        let mut t = base;
        t.time = 1.0 + f64::EPSILON;
        let mut c = base;
        c.cell = 1;
        let mut s = base;
        s.new_state = 1;
        let h0 = hash_events([&base]);
        assert_ne!(h0, hash_events([&t]));
        assert_ne!(h0, hash_events([&c]));
        assert_ne!(h0, hash_events([&s]));
    }

    #[test]
    fn merge_sorts_by_time_then_cell() {
        let pe0 = vec![
            Event { time: 0.5, cell: 3, old_state: 1, new_state: 1 },
            Event { time: 2.0, cell: 3, old_state: 1, new_state: -1 },
        ];
        let pe1 = vec![Event { time: 1.0, cell: 7, old_state: 1, new_state: -1 }];
        let (events, hash, count, flips) = merge_and_hash(vec![pe0, pe1], true);
        assert_eq!(count, 3);
        assert_eq!(flips, 2);
        assert!(events.windows(2).all(|w| Event::order(&w[0], &w[1]) != std::cmp::Ordering::Greater));
        assert_eq!(hash, hash_events(&events));
    }
}
