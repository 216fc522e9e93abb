//! Reproducible, independently indexed pseudo-random streams.
//!
//! Every source of randomness in a run is a named stream identified by a
//! [`StreamId`]. A draw depends only on `(seed, id, counter)`, never on the
//! draw history of any other stream, so the sequence a cell sees is the same
//! no matter how cells are grouped onto workers. This is what makes replay
//! and cross-engine trajectory comparison possible.

/// What a stream is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKind {
    /// Arrival times and state-change draws for one cell.
    Cell,
    /// The cumulative per-PE stream of the aggregated Poisson engine.
    Pe,
    /// A single run-global stream (standard serial procedure).
    Scalar,
    /// One draw per cell for random initial states.
    Init,
}

/// Identifies one stream within a run. `(kind, index)` pairs are unique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub kind: StreamKind,
    pub index: u64,
}

impl StreamId {
    pub fn cell(index: usize) -> Self {
        StreamId { kind: StreamKind::Cell, index: index as u64 }
    }
    pub fn pe(index: usize) -> Self {
        StreamId { kind: StreamKind::Pe, index: index as u64 }
    }
    pub fn scalar() -> Self {
        StreamId { kind: StreamKind::Scalar, index: 0 }
    }
    pub fn init(index: usize) -> Self {
        StreamId { kind: StreamKind::Init, index: index as u64 }
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer. Also used as the trajectory hash mixer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn kind_tag(kind: StreamKind) -> u64 {
    match kind {
        StreamKind::Cell => 0x43ea_11aa_96f1_d2b5,
        StreamKind::Pe => 0x9e92_c3f1_57d4_0e8b,
        StreamKind::Scalar => 0x2545_f491_4f6c_dd1d,
        StreamKind::Init => 0xd6e8_feb8_6659_fd93,
    }
}

/// A counter-based stream: the n-th value is a pure function of
/// `(seed, id, n)`, so a stream can be recreated and replayed from any point
/// without storing generator state.
#[derive(Debug, Clone)]
pub struct Stream {
    key: u64,
    counter: u64,
    id: StreamId,
}

impl Stream {
    pub fn new(seed: u64, id: StreamId) -> Stream {
        let key = mix64(seed ^ mix64(kind_tag(id.kind) ^ mix64(id.index.wrapping_add(GOLDEN))));
        Stream { key, counter: 0, id }
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    /// Number of values drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    #[inline]
    fn value_at(&self, n: u64) -> u64 {
        mix64(self.key.wrapping_add(n.wrapping_mul(GOLDEN)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = self.value_at(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform draw strictly inside (0,1).
    ///
    /// The top 52 bits are centered on the half-open cells of a 2^-52 grid:
    /// `(k + 0.5) * 2^-52`. Both endpoints are unreachable, which keeps
    /// `ln(r)` finite.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        let k = self.next_u64() >> 12;
        (k as f64 + 0.5) * (1.0 / 4_503_599_627_370_496.0)
    }
}

/// Derives an unrelated seed for replicate `i` of a multi-replicate
/// experiment.
pub fn replicate_seed(seed: u64, i: u64) -> u64 {
    mix64(seed ^ mix64(i.wrapping_add(1).wrapping_mul(GOLDEN)))
}
