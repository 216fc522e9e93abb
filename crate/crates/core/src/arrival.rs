//! Arrival laws: the rules producing each cell's next arrival time.
//!
//! Every law maps `(t, r)` with `r` uniform in (0,1) to a strictly later
//! time. The Poisson law gives i.i.d. exponential inter-arrivals; the others
//! cover the alternative asynchronies exercised by the performance model plus
//! the degenerate synchronous case (`Fixed`).

use crate::error::{arg_err, Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrivalLaw {
    /// Exponential inter-arrivals with the given rate (per unit simulated
    /// time): `next_t = t - ln(r)/rate`.
    Poisson { rate: f64 },
    /// Increment uniform in (0,1).
    Uniform01,
    /// Increment `r^(1/k)`.
    Power { k: u32 },
    /// Increment drawn from a Gaussian period with the given mean and
    /// standard deviation, conditioned on being positive (single-draw
    /// inverse-CDF form of resampling). `std_dev = 0` degenerates to a fixed
    /// period of `mean`.
    GaussianPeriod { mean: f64, std_dev: f64 },
    /// Increment exactly 1: the synchronous degenerate case.
    Fixed,
}

impl ArrivalLaw {
    pub fn poisson(rate: f64) -> Result<ArrivalLaw> {
        if !(rate > 0.0 && rate.is_finite()) {
            return arg_err(format!("poisson rate must be positive and finite (got {rate})"));
        }
        Ok(ArrivalLaw::Poisson { rate })
    }

    pub fn power(k: u32) -> Result<ArrivalLaw> {
        if k == 0 {
            return arg_err("power-law exponent must be >= 1");
        }
        Ok(ArrivalLaw::Power { k })
    }

    pub fn gaussian_period(mean: f64, std_dev: f64) -> Result<ArrivalLaw> {
        if !(mean > 0.0 && mean.is_finite()) {
            return arg_err(format!("gaussian period mean must be positive (got {mean})"));
        }
        if !(std_dev >= 0.0 && std_dev.is_finite()) {
            return arg_err(format!("gaussian period std-dev must be >= 0 (got {std_dev})"));
        }
        Ok(ArrivalLaw::GaussianPeriod { mean, std_dev })
    }

    /// True when inter-arrival times have a continuous density, so equal
    /// neighboring arrival times occur with probability zero.
    pub fn continuous_increments(&self) -> bool {
        match self {
            ArrivalLaw::Fixed => false,
            ArrivalLaw::GaussianPeriod { std_dev, .. } => *std_dev > 0.0,
            _ => true,
        }
    }

    /// The positive time increment for a draw `r` in (0,1).
    pub fn increment(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r < 1.0) {
            return arg_err(format!("uniform draw must lie strictly in (0,1) (got {r})"));
        }
        Ok(match *self {
            ArrivalLaw::Poisson { rate } => -r.ln() / rate,
            ArrivalLaw::Uniform01 => r,
            ArrivalLaw::Power { k } => r.powf(1.0 / f64::from(k)),
            ArrivalLaw::GaussianPeriod { mean, std_dev } => {
                if std_dev == 0.0 {
                    mean
                } else {
                    // Inverse CDF of the normal conditioned on a positive
                    // increment; one draw, same distribution as resampling.
                    let p0 = normal_cdf(-mean / std_dev);
                    let z = normal_inv_cdf(p0 + r * (1.0 - p0));
                    (mean + std_dev * z).max(f64::MIN_POSITIVE)
                }
            }
            ArrivalLaw::Fixed => 1.0,
        })
    }

    /// The next arrival time, always strictly greater than `t`.
    pub fn next_arrival(&self, t: f64, r: f64) -> Result<f64> {
        if !t.is_finite() {
            return arg_err(format!("time must be finite (got {t})"));
        }
        let next = t + self.increment(r)?;
        // Guard against the increment vanishing below the float spacing at t.
        Ok(if next > t { next } else { t.next_up() })
    }

    /// Parses the command-line syntax:
    /// `poisson:<rate> | uniform | power:<k> | gaussian:<mean>,<std> | fixed`.
    pub fn parse(s: &str) -> Result<ArrivalLaw> {
        let bad = || SimError::InvalidArgument(format!("unrecognized arrival law `{s}`"));
        if s == "uniform" {
            return Ok(ArrivalLaw::Uniform01);
        }
        if s == "fixed" {
            return Ok(ArrivalLaw::Fixed);
        }
        if let Some(rest) = s.strip_prefix("poisson:") {
            let rate: f64 = rest.parse().map_err(|_| bad())?;
            return ArrivalLaw::poisson(rate);
        }
        if let Some(rest) = s.strip_prefix("power:") {
            let k: u32 = rest.parse().map_err(|_| bad())?;
            return ArrivalLaw::power(k);
        }
        if let Some(rest) = s.strip_prefix("gaussian:") {
            let (m, sd) = rest.split_once(',').ok_or_else(bad)?;
            let mean: f64 = m.parse().map_err(|_| bad())?;
            let std_dev: f64 = sd.parse().map_err(|_| bad())?;
            return ArrivalLaw::gaussian_period(mean, std_dev);
        }
        Err(bad())
    }
}

impl std::fmt::Display for ArrivalLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArrivalLaw::Poisson { rate } => write!(f, "poisson:{rate}"),
            ArrivalLaw::Uniform01 => write!(f, "uniform"),
            ArrivalLaw::Power { k } => write!(f, "power:{k}"),
            ArrivalLaw::GaussianPeriod { mean, std_dev } => write!(f, "gaussian:{mean},{std_dev}"),
            ArrivalLaw::Fixed => write!(f, "fixed"),
        }
    }
}

/// Next arrival of the merged stream of `cells` independent Poisson streams
/// of the given rate each: `T - ln(r)/(rate * cells)`.
pub fn cumulative_next_arrival(rate: f64, cells: usize, t: f64, r: f64) -> Result<f64> {
    if cells == 0 {
        return arg_err("cumulative stream needs at least one cell");
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return arg_err(format!("rate must be positive and finite (got {rate})"));
    }
    if !(r > 0.0 && r < 1.0) {
        return arg_err(format!("uniform draw must lie strictly in (0,1) (got {r})"));
    }
    let next = t - r.ln() / (rate * cells as f64);
    Ok(if next > t { next } else { t.next_up() })
}

/// Standard normal CDF via the Abramowitz–Stegun style erfc approximation
/// (abs error ~1e-7, refined away for the inverse below).
pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Inverse standard normal CDF: Acklam's rational approximation plus one
/// Halley refinement step.
pub(crate) fn normal_inv_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    };

    // Halley refinement against the CDF above.
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}
