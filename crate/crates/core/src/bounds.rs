//! Confidence bounds on sample means and their inversion into minimal
//! sample sizes.
//!
//! Two tail bounds are provided for the probability that a sample mean
//! overshoots the population mean by `ε`: the distribution-free
//! Hoeffding bound `exp(−2mε²)` (with its sharper Kullback–Leibler
//! form when the population mean is known), and Serfling's bound for
//! sampling without replacement, which carries the finite-population
//! factor `N/(N−m+1)` and is tighter for every `m > 1`.
//!
//! All bounds here are one-sided, on `Pr(X̄ − μ ≥ ε)`; symmetric
//! two-sided variants double the confidence (union bound) and are
//! provided for the CLI's symmetric-error mode.

use crate::error::{Error, Result};

/// Hoeffding tail bound `exp(−2mε²)` for `m` independent samples of a
/// `[0, 1]`-valued variable. Does not depend on the dataset size.
pub fn hoeffding_confidence(m: u64, epsilon: f64) -> f64 {
    (-2.0 * m as f64 * epsilon * epsilon).exp()
}

/// The Kullback–Leibler form of Hoeffding's bound,
/// `[(μ/(μ+ε))^(μ+ε) ((1−μ)/(1−μ−ε))^(1−μ−ε)]^m`,
/// valid for `0 < μ` and `μ + ε < 1`; always at most
/// [`hoeffding_confidence`].
pub fn hoeffding_exact_confidence(m: u64, epsilon: f64, mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Domain(format!("mean {mu} outside (0, 1)")));
    }
    if epsilon <= 0.0 || mu + epsilon >= 1.0 {
        return Err(Error::Domain(format!(
            "mean {mu} + epsilon {epsilon} must stay below 1"
        )));
    }
    let a = mu + epsilon;
    // exp(−m·KL(μ+ε ‖ μ)), evaluated in log space
    let kl = a * (a / mu).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - mu)).ln();
    Ok((-(m as f64) * kl).exp())
}

/// Serfling's tail bound for uniform sampling **without** replacement
/// from `N` values bounded by `B`:
/// `exp{−(2mε²/B²)·(N/(N−m+1))}`.
pub fn serfling_confidence(m: u64, epsilon: f64, n: u64, value_bound: f64) -> Result<f64> {
    if m == 0 || m > n {
        return Err(Error::Domain(format!("sample size {m} outside [1, {n}]")));
    }
    if value_bound <= 0.0 {
        return Err(Error::Domain("value bound must be positive".into()));
    }
    let correction = n as f64 / (n - m + 1) as f64;
    Ok((-(2.0 * m as f64 * epsilon * epsilon / (value_bound * value_bound)) * correction).exp())
}

fn check_inversion_params(epsilon: f64, delta: f64) -> Result<()> {
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::Domain(format!("epsilon {epsilon} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta {delta} outside (0, 1)")));
    }
    Ok(())
}

/// Minimal `m` with `exp(−2mε²) ≤ δ`, i.e. `⌈ln(1/δ)/(2ε²)⌉`.
pub fn sample_size_hoeffding(epsilon: f64, delta: f64) -> Result<u64> {
    check_inversion_params(epsilon, delta)?;
    let exact = (1.0 / delta).ln() / (2.0 * epsilon * epsilon);
    if !exact.is_finite() || exact > 1e18 {
        return Err(Error::Domain(format!(
            "required sample size {exact:e} exceeds the supported range"
        )));
    }
    let mut m = (exact.ceil() as u64).max(1);
    // nudge the ceiling against float rounding on either side; the
    // closed form is off by at most one step
    for _ in 0..4 {
        if m > 1 && hoeffding_confidence(m - 1, epsilon) <= delta {
            m -= 1;
        } else {
            break;
        }
    }
    for _ in 0..4 {
        if hoeffding_confidence(m, epsilon) > delta {
            m += 1;
        } else {
            break;
        }
    }
    Ok(m)
}

/// Two-sided variant: minimal `m` with `2·exp(−2mε²) ≤ δ`.
pub fn sample_size_hoeffding_two_sided(epsilon: f64, delta: f64) -> Result<u64> {
    sample_size_hoeffding(epsilon, delta / 2.0)
}

/// Minimal `m ≤ N` with `serfling_confidence(m, ε, N, B) ≤ δ`.
///
/// The bound is monotone in `m`, so the closed-form solution of the
/// linear crossing is verified (and nudged if float rounding put it
/// off by one). Errors when even `m = N` cannot meet the bound.
pub fn sample_size_serfling(epsilon: f64, delta: f64, n: u64, value_bound: f64) -> Result<u64> {
    check_inversion_params(epsilon, delta)?;
    if n == 0 {
        return Err(Error::Domain("dataset size must be at least 1".into()));
    }
    if value_bound <= 0.0 {
        return Err(Error::Domain("value bound must be positive".into()));
    }
    // exp{−(2mε²/B²)(N/(N−m+1))} ≤ δ
    //   ⇔ m·(2ε²N/B²) ≥ ln(1/δ)·(N−m+1)
    //   ⇔ m ≥ ln(1/δ)(N+1) / (2ε²N/B² + ln(1/δ))
    let l = (1.0 / delta).ln();
    let scaled = 2.0 * (epsilon / value_bound) * (epsilon / value_bound) * n as f64;
    let exact = l * (n as f64 + 1.0) / (scaled + l);
    let mut m = (exact.ceil() as u64).clamp(1, n);
    for _ in 0..4 {
        if m > 1 && serfling_confidence(m - 1, epsilon, n, value_bound)? <= delta {
            m -= 1;
        } else {
            break;
        }
    }
    while serfling_confidence(m, epsilon, n, value_bound)? > delta {
        if m == n {
            return Err(Error::Infeasible(format!(
                "no sample size up to N={n} reaches confidence {delta} at epsilon {epsilon}"
            )));
        }
        m += 1;
    }
    Ok(m)
}

/// Scale-up estimation: extrapolates a sample-intersection count to
/// the population, `count · N / m`.
pub fn scale_up_estimate(sample_intersection: u64, m: u64, n: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    if sample_intersection > m {
        return Err(Error::Domain(format!(
            "sample intersection {sample_intersection} exceeds sample size {m}"
        )));
    }
    Ok(sample_intersection as f64 * n as f64 / m as f64)
}

/// Converts a client-facing absolute error `E` into the relative error
/// `ε = E/N` used by the bounds.
pub fn absolute_to_relative_error(absolute: f64, n: u64) -> f64 {
    absolute / n as f64
}
