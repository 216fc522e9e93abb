//! Round-model efficiency predictors and the measured-efficiency formula.
//!
//! The one-cell model tracks only local times: per round a cell's time is
//! incremented iff it does not exceed the minimum over its first-degree
//! neighbors (double-buffered sweep). The aggregated model tracks one scaled
//! local time h per PE and replays the waiting pattern of the aggregated
//! Poisson algorithm: a kernel selection (probability `p0 = (m-2)^2/m^2`)
//! advances unconditionally, an edge selection (`p1 = 4(m-2)/m^2`) must see
//! one uniformly chosen neighbor not behind, a corner selection (`p2 =
//! 4/m^2`) must see two adjacent neighbors not behind. A selection that
//! cannot proceed stays pending — the PE keeps waiting on the same cells,
//! exactly like the real engine's wait loop — and each blocked round counts
//! as wasted work.

use crate::arrival::ArrivalLaw;
use crate::error::{arg_err, Result};
use crate::streams::{replicate_seed, Stream, StreamId};
use crate::topology::Lattice;

/// Mean useful-work fraction with a Student's-t confidence half-width over
/// replicate runs.
#[derive(Debug, Clone, Copy)]
pub struct EfficiencyEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub level: f64,
    /// Post-warmup rounds used per replicate.
    pub rounds: u64,
    pub warmup: u64,
    pub replicates: u32,
}

/// Default warmup: the first 10% of rounds, at least 100 (never the whole
/// run).
pub fn default_warmup(rounds: u64) -> u64 {
    (rounds / 10).max(100).min(rounds.saturating_sub(1))
}

fn finish_estimate(
    means: &[f64],
    level: f64,
    rounds: u64,
    warmup: u64,
) -> Result<EfficiencyEstimate> {
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    let half_width = if means.len() >= 2 {
        let (lo, hi) = confidence_interval(means, level)?;
        (hi - lo) / 2.0
    } else {
        0.0
    };
    Ok(EfficiencyEstimate {
        mean,
        half_width,
        level,
        rounds: rounds - warmup,
        warmup,
        replicates: means.len() as u32,
    })
}

/// One-cell-per-PE round model for a periodic array of the given dimension
/// and side.
#[allow(clippy::too_many_arguments)] // mirrors the documented operation signature
pub fn predict_one_cell(
    dim: usize,
    n: usize,
    law: &ArrivalLaw,
    rounds: u64,
    warmup: u64,
    replicates: u32,
    seed: u64,
    level: f64,
) -> Result<EfficiencyEstimate> {
    let lattice = Lattice::new(dim, n)?;
    if warmup >= rounds {
        return arg_err(format!("warmup {warmup} must be below round count {rounds}"));
    }
    if replicates == 0 {
        return arg_err("need at least one replicate");
    }
    let cells = lattice.cell_count();
    // Flattened first-degree neighbor table.
    let mut offsets = Vec::with_capacity(cells + 1);
    let mut flat: Vec<u32> = Vec::with_capacity(cells * 2 * dim);
    offsets.push(0u32);
    for c in 0..cells {
        flat.extend(lattice.von_neumann(c).into_iter().map(|x| x as u32));
        offsets.push(flat.len() as u32);
    }
    let mut means = Vec::with_capacity(replicates as usize);
    for rep in 0..replicates {
        let rep_seed = replicate_seed(seed, u64::from(rep));
        let mut streams: Vec<Stream> =
            (0..cells).map(|c| Stream::new(rep_seed, StreamId::cell(c))).collect();
        let mut cur = vec![0.0f64; cells];
        let mut next = vec![0.0f64; cells];
        let mut sum_frac = 0.0;
        for round in 0..rounds {
            let mut n0 = 0u64;
            for c in 0..cells {
                let t = cur[c];
                let lo = offsets[c] as usize;
                let hi = offsets[c + 1] as usize;
                let eligible = flat[lo..hi].iter().all(|&nb| t <= cur[nb as usize]);
                if eligible {
                    n0 += 1;
                    next[c] = t + law.increment(streams[c].next_uniform())?;
                } else {
                    next[c] = t;
                }
            }
            // The globally minimal time always passes its test.
            debug_assert!(n0 >= 1);
            std::mem::swap(&mut cur, &mut next);
            if round >= warmup {
                sum_frac += n0 as f64 / cells as f64;
            }
        }
        means.push(sum_frac / (rounds - warmup) as f64);
    }
    finish_estimate(&means, level, rounds, warmup)
}

/// Aggregated round model on the `(n/m)^2` PE grid, with an optional bound
/// on how far a PE's h may run ahead of the global minimum (in units of the
/// mean inter-arrival time of the modeled event process).
#[allow(clippy::too_many_arguments)] // mirrors the documented operation signature
pub fn predict_aggregated(
    n: usize,
    m: usize,
    rounds: u64,
    warmup: u64,
    replicates: u32,
    seed: u64,
    lag_bound: Option<f64>,
    level: f64,
) -> Result<EfficiencyEstimate> {
    if m < 3 {
        return arg_err(format!("subarray side must be >= 3 (got {m})"));
    }
    if n == 0 || !n.is_multiple_of(m) {
        return arg_err(format!("array side {n} must be a positive multiple of {m}"));
    }
    if warmup >= rounds {
        return arg_err(format!("warmup {warmup} must be below round count {rounds}"));
    }
    if replicates == 0 {
        return arg_err("need at least one replicate");
    }
    if let Some(b) = lag_bound {
        if !b.is_finite() || b <= 0.0 {
            return arg_err(format!("lag bound must be positive (got {b})"));
        }
    }
    let grid = n / m;
    let pes = grid * grid;
    let mf = m as f64;
    let p0 = (mf - 2.0) * (mf - 2.0) / (mf * mf);
    let p1 = 4.0 * (mf - 2.0) / (mf * mf);
    // Neighbor ids in N, E, S, W order; corner checks use adjacent pairs.
    let nbr: Vec<[u32; 4]> = (0..pes)
        .map(|pe| {
            let (r, c) = (pe / grid, pe % grid);
            let up = (r + grid - 1) % grid;
            let down = (r + 1) % grid;
            let left = (c + grid - 1) % grid;
            let right = (c + 1) % grid;
            [
                (up * grid + c) as u32,
                (r * grid + right) as u32,
                (down * grid + c) as u32,
                (r * grid + left) as u32,
            ]
        })
        .collect();
    const PAIRS: [(usize, usize); 4] = [(0, 1), (1, 2), (2, 3), (3, 0)];

    let mut means = Vec::with_capacity(replicates as usize);
    for rep in 0..replicates {
        let rep_seed = replicate_seed(seed, u64::from(rep));
        let mut streams: Vec<Stream> =
            (0..pes).map(|pe| Stream::new(rep_seed, StreamId::pe(pe))).collect();
        let mut cur = vec![0.0f64; pes];
        let mut next = vec![0.0f64; pes];
        // A pending selection keeps its required neighbors until it commits.
        let mut pending: Vec<Option<[Option<u32>; 2]>> = vec![None; pes];
        let mut successes = 0u64;
        for round in 0..rounds {
            let gmin = if lag_bound.is_some() {
                cur.iter().copied().fold(f64::INFINITY, f64::min)
            } else {
                0.0
            };
            for pe in 0..pes {
                let reqs = match pending[pe] {
                    Some(reqs) => reqs,
                    None => {
                        let u = streams[pe].next_uniform();
                        if u < p0 {
                            [None, None]
                        } else if u < p0 + p1 {
                            let pick = ((streams[pe].next_uniform() * 4.0) as usize).min(3);
                            [Some(nbr[pe][pick]), None]
                        } else {
                            let pick = ((streams[pe].next_uniform() * 4.0) as usize).min(3);
                            let (a, b) = PAIRS[pick];
                            [Some(nbr[pe][a]), Some(nbr[pe][b])]
                        }
                    }
                };
                let h = cur[pe];
                let mut ok = reqs
                    .iter()
                    .flatten()
                    .all(|&other| cur[other as usize] >= h);
                if let Some(bound) = lag_bound {
                    ok = ok && h - gmin <= bound;
                }
                if ok {
                    next[pe] = h - streams[pe].next_uniform().ln();
                    pending[pe] = None;
                    if round >= warmup {
                        successes += 1;
                    }
                } else {
                    next[pe] = h;
                    pending[pe] = Some(reqs);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        means.push(successes as f64 / ((rounds - warmup) * pes as u64) as f64);
    }
    finish_estimate(&means, level, rounds, warmup)
}

/// Two-sided Student's-t confidence interval for the mean of `samples`.
/// Supported levels: 0.95, 0.99, 0.9999.
pub fn confidence_interval(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return arg_err("confidence interval needs at least two samples");
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let stderr = (var / n).sqrt();
    let t = t_quantile(samples.len() - 1, level)?;
    Ok((mean - t * stderr, mean + t * stderr))
}

/// Wall-clock efficiency: serial time / (PEs * parallel time).
pub fn measured_efficiency(serial_time: f64, n_pes: usize, parallel_time: f64) -> Result<f64> {
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if !positive(serial_time) || !positive(parallel_time) || n_pes == 0 {
        return arg_err("efficiency needs positive times and at least one PE");
    }
    Ok(serial_time / (n_pes as f64 * parallel_time))
}

/// Speed-up implied by an efficiency: `efficiency * n_pes`.
pub fn speedup(efficiency: f64, n_pes: usize) -> f64 {
    efficiency * n_pes as f64
}

fn t_quantile(df: usize, level: f64) -> Result<f64> {
    let (table, z): (&[f64; 120], f64) = if (level - 0.95).abs() < 1e-12 {
        (&T_95, 1.959964)
    } else if (level - 0.99).abs() < 1e-12 {
        (&T_99, 2.575829)
    } else if (level - 0.9999).abs() < 1e-12 {
        (&T_9999, 3.890592)
    } else {
        return arg_err(format!("unsupported confidence level {level} (use 0.95, 0.99, 0.9999)"));
    };
    if df == 0 {
        return arg_err("confidence interval needs at least two samples");
    }
    Ok(if df <= 120 { table[df - 1] } else { z })
}

// Two-sided Student's-t quantiles for df 1..=120.
#[rustfmt::skip]
const T_95: [f64; 120] = [
    12.706205, 4.302653, 3.182446, 2.776445, 2.570582, 2.446912,
    2.364624, 2.306004, 2.262157, 2.228139, 2.200985, 2.178813,
    2.160369, 2.144787, 2.131450, 2.119905, 2.109816, 2.100922,
    2.093024, 2.085963, 2.079614, 2.073873, 2.068658, 2.063899,
    2.059539, 2.055529, 2.051831, 2.048407, 2.045230, 2.042272,
    2.039513, 2.036933, 2.034515, 2.032245, 2.030108, 2.028094,
    2.026192, 2.024394, 2.022691, 2.021075, 2.019541, 2.018082,
    2.016692, 2.015368, 2.014103, 2.012896, 2.011741, 2.010635,
    2.009575, 2.008559, 2.007584, 2.006647, 2.005746, 2.004879,
    2.004045, 2.003241, 2.002465, 2.001717, 2.000995, 2.000298,
    1.999624, 1.998972, 1.998341, 1.997730, 1.997138, 1.996564,
    1.996008, 1.995469, 1.994945, 1.994437, 1.993943, 1.993464,
    1.992997, 1.992543, 1.992102, 1.991673, 1.991254, 1.990847,
    1.990450, 1.990063, 1.989686, 1.989319, 1.988960, 1.988610,
    1.988268, 1.987934, 1.987608, 1.987290, 1.986979, 1.986675,
    1.986377, 1.986086, 1.985802, 1.985523, 1.985251, 1.984984,
    1.984723, 1.984467, 1.984217, 1.983972, 1.983731, 1.983495,
    1.983264, 1.983038, 1.982815, 1.982597, 1.982383, 1.982173,
    1.981967, 1.981765, 1.981567, 1.981372, 1.981180, 1.980992,
    1.980808, 1.980626, 1.980448, 1.980272, 1.980100, 1.979930,
];

#[rustfmt::skip]
const T_99: [f64; 120] = [
    63.656741, 9.924843, 5.840909, 4.604095, 4.032143, 3.707428,
    3.499483, 3.355387, 3.249836, 3.169273, 3.105807, 3.054540,
    3.012276, 2.976843, 2.946713, 2.920782, 2.898231, 2.878440,
    2.860935, 2.845340, 2.831360, 2.818756, 2.807336, 2.796940,
    2.787436, 2.778715, 2.770683, 2.763262, 2.756386, 2.749996,
    2.744042, 2.738481, 2.733277, 2.728394, 2.723806, 2.719485,
    2.715409, 2.711558, 2.707913, 2.704459, 2.701181, 2.698066,
    2.695102, 2.692278, 2.689585, 2.687013, 2.684556, 2.682204,
    2.679952, 2.677793, 2.675722, 2.673734, 2.671823, 2.669985,
    2.668216, 2.666512, 2.664870, 2.663287, 2.661759, 2.660283,
    2.658857, 2.657479, 2.656145, 2.654854, 2.653604, 2.652394,
    2.651220, 2.650081, 2.648977, 2.647905, 2.646863, 2.645852,
    2.644869, 2.643913, 2.642983, 2.642078, 2.641198, 2.640340,
    2.639505, 2.638691, 2.637897, 2.637123, 2.636369, 2.635632,
    2.634914, 2.634212, 2.633527, 2.632858, 2.632204, 2.631565,
    2.630940, 2.630330, 2.629732, 2.629148, 2.628576, 2.628016,
    2.627468, 2.626931, 2.626405, 2.625891, 2.625386, 2.624891,
    2.624407, 2.623932, 2.623465, 2.623008, 2.622560, 2.622120,
    2.621688, 2.621265, 2.620849, 2.620440, 2.620039, 2.619645,
    2.619258, 2.618878, 2.618504, 2.618137, 2.617776, 2.617421,
];

#[rustfmt::skip]
const T_9999: [f64; 120] = [
    6366.197671, 99.992500, 28.000130, 15.544101, 11.177710, 9.082346,
    7.884584, 7.120004, 6.593683, 6.211051, 5.921194, 5.694466,
    5.512515, 5.363413, 5.239088, 5.133894, 5.043765, 4.965706,
    4.897462, 4.837301, 4.783877, 4.736124, 4.693189, 4.654381,
    4.619135, 4.586984, 4.557539, 4.530474, 4.505512, 4.482417,
    4.460989, 4.441054, 4.422461, 4.405080, 4.388796, 4.373509,
    4.359130, 4.345581, 4.332791, 4.320700, 4.309251, 4.298395,
    4.288086, 4.278285, 4.268955, 4.260063, 4.251579, 4.243475,
    4.235726, 4.228310, 4.221205, 4.214393, 4.207856, 4.201577,
    4.195542, 4.189736, 4.184147, 4.178763, 4.173572, 4.168565,
    4.163732, 4.159064, 4.154553, 4.150190, 4.145970, 4.141884,
    4.137927, 4.134093, 4.130375, 4.126770, 4.123271, 4.119874,
    4.116575, 4.113369, 4.110253, 4.107223, 4.104276, 4.101407,
    4.098614, 4.095895, 4.093245, 4.090663, 4.088146, 4.085692,
    4.083298, 4.080961, 4.078681, 4.076455, 4.074280, 4.072156,
    4.070081, 4.068052, 4.066069, 4.064129, 4.062232, 4.060376,
    4.058560, 4.056782, 4.055041, 4.053337, 4.051667, 4.050031,
    4.048428, 4.046857, 4.045317, 4.043808, 4.042327, 4.040874,
    4.039449, 4.038051, 4.036679, 4.035332, 4.034010, 4.032712,
    4.031437, 4.030184, 4.028954, 4.027745, 4.026557, 4.025390,
];
