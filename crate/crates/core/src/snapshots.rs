//! Bounded-lag snapshot output.
//!
//! A ring of `B` frames is filled cooperatively: before a PE may advance its
//! local time past `K * interval` it must store its subarray's image into
//! frame `K mod B`, and that frame only becomes writable for snapshot `K`
//! once snapshot `K - B` has been drained. A single drain agent emits
//! complete frames in increasing order as pattern files. The finite ring is
//! what bounds the spread between PE local times.

use crate::error::{arg_err, Result};
use crate::topology::Lattice;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicI8, AtomicU64, AtomicUsize, Ordering};

#[derive(Debug, Clone)]
pub struct SnapshotConfig {
    /// Simulated time between snapshots.
    pub interval: f64,
    /// Number of buffer frames (B >= 1).
    pub frames: usize,
    pub out_dir: PathBuf,
}

struct Frame {
    /// Snapshot index this frame currently accepts.
    era: AtomicU64,
    /// Subarrays stored so far.
    fill: AtomicUsize,
    cells: Vec<AtomicI8>,
}

/// Shared frame buffer. PEs write disjoint subarray regions; the drain agent
/// is the only reader of frame contents.
pub struct FrameRing {
    interval: f64,
    n_subarrays: usize,
    k_max: u64,
    frames: Vec<Frame>,
}

impl FrameRing {
    /// Snapshots are taken at times `K * interval` for `K*interval <
    /// end_time`, starting at K = 0 (the initial configuration).
    pub fn new(
        cfg: &SnapshotConfig,
        cell_count: usize,
        n_subarrays: usize,
        end_time: f64,
    ) -> Result<FrameRing> {
        if !(cfg.interval > 0.0 && cfg.interval.is_finite()) {
            return arg_err(format!("snapshot interval must be positive (got {})", cfg.interval));
        }
        if cfg.frames == 0 {
            return arg_err("frame ring needs at least one frame");
        }
        if !end_time.is_finite() || end_time <= 0.0 {
            return arg_err("snapshots need a positive end time");
        }
        let mut k_max = (end_time / cfg.interval).ceil() as u64;
        while k_max > 0 && k_max as f64 * cfg.interval >= end_time {
            k_max -= 1;
        }
        let frames = (0..cfg.frames)
            .map(|i| Frame {
                era: AtomicU64::new(i as u64),
                fill: AtomicUsize::new(0),
                cells: (0..cell_count).map(|_| AtomicI8::new(0)).collect(),
            })
            .collect();
        Ok(FrameRing { interval: cfg.interval, n_subarrays, k_max, frames })
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    /// Largest snapshot index of the run.
    pub fn k_max(&self) -> u64 {
        self.k_max
    }

    fn frame(&self, k: u64) -> &Frame {
        &self.frames[(k % self.frames.len() as u64) as usize]
    }

    /// Stores one subarray's image for snapshot `k`. Returns false when the
    /// frame is still occupied by an undrained earlier snapshot; the caller
    /// must retry later (this is the blocking that bounds the lag).
    pub fn try_store(&self, k: u64, own_cells: &[u32], states: &[AtomicI8]) -> bool {
        let frame = self.frame(k);
        if frame.era.load(Ordering::Acquire) != k {
            return false;
        }
        for &c in own_cells {
            let s = states[c as usize].load(Ordering::Relaxed);
            frame.cells[c as usize].store(s, Ordering::Relaxed);
        }
        frame.fill.fetch_add(1, Ordering::Release);
        true
    }

    /// Takes snapshot `k` out of the ring if every subarray has stored it,
    /// releasing the frame for snapshot `k + B`.
    pub fn try_drain(&self, k: u64) -> Option<Vec<i8>> {
        let frame = self.frame(k);
        if frame.era.load(Ordering::Relaxed) != k
            || frame.fill.load(Ordering::Acquire) != self.n_subarrays
        {
            return None;
        }
        let image: Vec<i8> = frame.cells.iter().map(|c| c.load(Ordering::Relaxed)).collect();
        frame.fill.store(0, Ordering::Relaxed);
        frame.era.store(k + self.frames.len() as u64, Ordering::Release);
        Some(image)
    }
}

/// File name of snapshot `k` inside the output directory.
pub fn pattern_path(out_dir: &Path, k: u64) -> PathBuf {
    out_dir.join(format!("pattern_K{k}.pbm"))
}

/// Writes a text bitmap: header `P1 <width> <height> t=<time>`, then rows of
/// space-separated 0/1 digits (positive states map to 1). Rows follow cell
/// id order, `side` cells per row.
pub fn write_pattern(image: &[i8], lattice: &Lattice, time: f64, path: &Path) -> Result<()> {
    use std::io::Write;
    let width = lattice.side();
    let height = image.len() / width;
    let mut out = String::with_capacity(image.len() * 2 + 64);
    out.push_str(&format!("P1 {width} {height} t={time}\n"));
    for row in image.chunks(width) {
        let mut first = true;
        for &s in row {
            if !first {
                out.push(' ');
            }
            out.push(if s > 0 { '1' } else { '0' });
            first = false;
        }
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a pattern file back: `(bits, width, height, time)` with bits in
/// {0, 1}.
pub fn parse_pattern(path: &Path) -> Result<(Vec<i8>, usize, usize, f64)> {
    let text = std::fs::read_to_string(path)?;
    let bad = || crate::error::SimError::InvalidArgument(format!("malformed pattern file {path:?}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(bad)?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("P1") {
        return Err(bad());
    }
    let width: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let height: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let time: f64 = parts
        .next()
        .and_then(|t| t.strip_prefix("t="))
        .ok_or_else(bad)?
        .parse()
        .map_err(|_| bad())?;
    let mut bits = Vec::with_capacity(width * height);
    for line in lines {
        for tok in line.split_whitespace() {
            match tok {
                "0" => bits.push(0),
                "1" => bits.push(1),
                _ => return Err(bad()),
            }
        }
    }
    if bits.len() != width * height {
        return Err(bad());
    }
    Ok((bits, width, height, time))
}

/// Maps raw engine states onto pattern bits (spin -1 -> 0, +1 -> 1).
pub fn to_bits(states: &[i8]) -> Vec<i8> {
    states.iter().map(|&s| i8::from(s > 0)).collect()
}
