//! Small statistical test helpers used by the verification suites:
//! Kolmogorov–Smirnov one- and two-sample statistics and a pooled chi-square
//! goodness-of-fit test.

/// One-sample KS statistic of `sorted` against a reference CDF.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Two-sample KS statistic; both inputs must be sorted ascending. Tied
/// values (common for discrete observables) are consumed on both sides
/// before the CDF gap is evaluated.
pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (mut i, mut j) = (0usize, 0usize);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS test: true when the hypothesis of a common
/// distribution is rejected at the given significance (0.05, 0.01, or 0.001).
pub fn ks_two_sample_reject(a: &[f64], b: &[f64], significance: f64) -> bool {
    let c = match significance {
        s if (s - 0.05).abs() < 1e-12 => 1.3581,
        s if (s - 0.01).abs() < 1e-12 => 1.6276,
        s if (s - 0.001).abs() < 1e-12 => 1.9495,
        _ => panic!("unsupported KS significance {significance}"),
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let threshold = c * ((na + nb) / (na * nb)).sqrt();
    ks_two_sample_statistic(a, b) > threshold
}

/// Pearson chi-square with Cochran-style pooling: categories whose expected
/// count falls below `min_expected` are merged into one bin. Returns the
/// statistic and the degrees of freedom (pooled bins - 1).
pub fn chi_square_pooled(observed: &[f64], expected: &[f64], min_expected: f64) -> (f64, usize) {
    assert_eq!(observed.len(), expected.len());
    let mut x2 = 0.0;
    let mut bins = 0usize;
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        if e < min_expected {
            pool_o += o;
            pool_e += e;
        } else {
            x2 += (o - e).powi(2) / e;
            bins += 1;
        }
    }
    if pool_e >= min_expected {
        x2 += (pool_o - pool_e).powi(2) / pool_e;
        bins += 1;
    } else if pool_e > 0.0 {
        // Pooled remainder still too small: fold it into the last kept bin
        // by treating it as one more category anyway.
        x2 += (pool_o - pool_e).powi(2) / pool_e.max(1e-9);
        bins += 1;
    }
    (x2, bins.saturating_sub(1))
}

/// Upper critical value of the chi-square distribution by the
/// Wilson–Hilferty approximation. Supported significances: 0.05, 0.01, 0.001.
pub fn chi_square_critical(df: usize, significance: f64) -> f64 {
    let z = match significance {
        s if (s - 0.05).abs() < 1e-12 => 1.644854,
        s if (s - 0.01).abs() < 1e-12 => 2.326348,
        s if (s - 0.001).abs() < 1e-12 => 3.090232,
        _ => panic!("unsupported chi-square significance {significance}"),
    };
    let d = df as f64;
    d * (1.0 - 2.0 / (9.0 * d) + z * (2.0 / (9.0 * d)).sqrt()).powi(3)
}
