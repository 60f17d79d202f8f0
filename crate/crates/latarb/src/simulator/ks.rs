//! Kolmogorov-Smirnov check of the exponential-latency Laplace limit.
//!
//! With exponential latency at rate `lambda` and no drift, the settlement
//! return is Laplace with location `delta` and scale `sigma / sqrt(2 lambda)`.

use serde::{Deserialize, Serialize};

/// CDF of the Laplace distribution with location `loc` and scale `scale`.
pub fn laplace_cdf(x: f64, loc: f64, scale: f64) -> f64 {
    let z = (x - loc) / scale;
    if z < 0.0 {
        0.5 * z.exp()
    } else {
        1.0 - 0.5 * (-z).exp()
    }
}

/// Result of the goodness-of-fit test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaplaceCheck {
    pub ks_distance: f64,
    /// Critical KS distance at the configured significance level.
    pub threshold: f64,
    pub significance: f64,
    pub p_value: f64,
    pub pass: bool,
    pub n: usize,
    pub location: f64,
    pub scale: f64,
}

/// KS distance between the empirical CDF of `sample` and
/// `Laplace(delta, sigma / sqrt(2 lambda))`, tested at `significance`
/// (the paper-facing default is 1%).
pub fn laplace_check(sample: &[f64], delta: f64, sigma: f64, lambda: f64, significance: f64) -> LaplaceCheck {
    let scale = sigma / (2.0 * lambda).sqrt();
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let nf = n as f64;
    let mut d = 0.0_f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = laplace_cdf(*x, delta, scale);
        d = d.max((f - i as f64 / nf).abs());
        d = d.max((f - (i as f64 + 1.0) / nf).abs());
    }
    let threshold = kolmogorov_quantile(1.0 - significance) / nf.sqrt();
    let p_value = kolmogorov_sf((nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d);
    LaplaceCheck {
        ks_distance: d,
        threshold,
        significance,
        p_value,
        pass: d < threshold,
        n,
        location: delta,
        scale,
    }
}

/// Survival function of the Kolmogorov distribution,
/// `Q(t) = 2 sum_k (-1)^(k-1) exp(-2 k² t²)`.
fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Inverse of the Kolmogorov CDF by bisection.
fn kolmogorov_quantile(p: f64) -> f64 {
    let target = 1.0 - p;
    let (mut lo, mut hi) = (1e-3, 5.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
