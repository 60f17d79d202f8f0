//! General certainty-equivalent root finder.
//!
//! The bound is the root of the order-4 truncated certainty-equivalent
//! expansion
//!
//! ```text
//! F(d) = d + m1 mu + sum_{k=2..4} c_k(p) / k! * mu_k,     p = d + m1 mu
//! ```
//!
//! where `mu_k` are central moments of the settlement return and `c_k` are
//! utility derivative ratios `U^(k)/U'`. For exponential utility the ratios
//! are the constants `(-g)^(k-1)`; for isoelastic utility they are the power
//! ratios `-g/p`, `g(g+1)/p²`, `-g(g+1)(g+2)/p³` evaluated at the expansion
//! point, which makes `F` the same quartic the closed form solves. `F` is
//! strictly increasing on the search domain, so bracket-and-bisect is
//! globally safe.

use serde::{Deserialize, Serialize};

use crate::bounds::LatencyMoments;
use crate::error::{Error, Result};

/// Utility families for the certainty-equivalent machinery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Utility {
    /// Risk neutral; the certainty equivalent is the mean return.
    Linear,
    /// Isoelastic, `U(r) = (1+r)^(1-g) / (1-g)`, relative risk aversion `g`.
    Crra { gamma: f64 },
    /// Exponential, `U(r) = (1 - exp(-g (1+r))) / g`, absolute risk aversion `g`.
    Cara { gamma: f64 },
}

impl Utility {
    pub fn evaluate(&self, r: f64) -> f64 {
        match *self {
            Utility::Linear => r,
            Utility::Crra { gamma } => (1.0 + r).powf(1.0 - gamma) / (1.0 - gamma),
            Utility::Cara { gamma } => (1.0 - (-gamma * (1.0 + r)).exp()) / gamma,
        }
    }

    /// Inverse utility, mapping expected utility back to a certain return.
    pub fn inverse(&self, u: f64) -> f64 {
        match *self {
            Utility::Linear => u,
            Utility::Crra { gamma } => ((1.0 - gamma) * u).powf(1.0 / (1.0 - gamma)) - 1.0,
            Utility::Cara { gamma } => -(1.0 - gamma * u).ln() / gamma - 1.0,
        }
    }

    /// Marginal utility, for delta-method standard errors.
    pub fn marginal(&self, r: f64) -> f64 {
        match *self {
            Utility::Linear => 1.0,
            Utility::Crra { gamma } => (1.0 + r).powf(-gamma),
            Utility::Cara { gamma } => (-gamma * (1.0 + r)).exp(),
        }
    }

    /// Smallest admissible return. Isoelastic utility is undefined at
    /// `r <= -1`; the simulator rejects paths at or below this guard.
    pub fn min_return(&self) -> f64 {
        match self {
            Utility::Crra { .. } => -0.99,
            _ => f64::NEG_INFINITY,
        }
    }

    /// Derivative ratio `U^(k)/U'` at expansion point `p`, order `k` in 2..=4.
    pub(crate) fn ratio(&self, k: u32, p: f64) -> f64 {
        match *self {
            Utility::Linear => 0.0,
            // (-g)^(k-1)
            Utility::Cara { gamma } => match k {
                2 => -gamma,
                3 => gamma * gamma,
                4 => -gamma * gamma * gamma,
                _ => unreachable!(),
            },
            Utility::Crra { gamma } => match k {
                2 => -gamma / p,
                3 => gamma * (gamma + 1.0) / (p * p),
                4 => -gamma * (gamma + 1.0) * (gamma + 2.0) / (p * p * p),
                _ => unreachable!(),
            },
        }
    }
}

/// Central moments of the settlement return `r = delta + mu tau + sigma sqrt(tau) Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnMoments {
    /// `E(r) - delta = m1 mu`.
    pub mean_shift: f64,
    pub central2: f64,
    pub central3: f64,
    pub central4: f64,
}

impl ReturnMoments {
    /// Mix the latency moments with the Brownian component.
    pub fn from_latency(sigma: f64, mu: f64, latency: &LatencyMoments) -> Self {
        let s2 = sigma * sigma;
        let v = latency.variance();
        let central2 = mu * mu * v + s2 * latency.m1;
        let central3 = mu.powi(3) * latency.central3 + 3.0 * mu * s2 * v;
        let central4 = mu.powi(4) * latency.central4
            + 3.0 * s2 * s2 * latency.m2
            + 6.0 * s2 * mu * mu * (latency.m1.powi(3) + latency.m3() - 2.0 * latency.m1 * latency.m2);
        ReturnMoments { mean_shift: mu * latency.m1, central2, central3, central4 }
    }
}

/// Truncated certainty equivalent of trading at price difference `delta`,
/// as a function of `delta`, using analytic return moments.
pub(crate) fn truncated_ce(utility: &Utility, delta: f64, moments: &ReturnMoments) -> f64 {
    let p = delta + moments.mean_shift;
    let mut ce = p;
    if moments.central2 != 0.0 {
        ce += utility.ratio(2, p) / 2.0 * moments.central2;
    }
    if moments.central3 != 0.0 {
        ce += utility.ratio(3, p) / 6.0 * moments.central3;
    }
    if moments.central4 != 0.0 {
        ce += utility.ratio(4, p) / 24.0 * moments.central4;
    }
    ce
}

/// Arbitrage bound as the root of the truncated certainty equivalent.
///
/// Returns `max(0, d*)` where `F(d*) = 0`. Bracketing starts at
/// `[0, sigma sqrt(m2)]` and expands geometrically until the sign changes,
/// then bisects; `F` is strictly increasing so the root is unique.
pub fn ce_root_bound(
    utility: &Utility,
    sigma: f64,
    mu: f64,
    latency: &LatencyMoments,
) -> Result<f64> {
    if !(sigma >= 0.0) || !(latency.m1 > 0.0) || !(latency.m2 >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "ce_root_bound",
            reason: format!("need sigma >= 0, m1 > 0, m2 >= 0; got sigma={sigma}, m1={}, m2={}", latency.m1, latency.m2),
        });
    }
    if let Utility::Crra { gamma } = utility {
        if !(*gamma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: "isoelastic utility needs gamma > 0".into(),
            });
        }
    }
    if *utility == Utility::Linear {
        return Ok((-mu * latency.m1).max(0.0));
    }
    if sigma == 0.0 && mu == 0.0 {
        // F(d) = d: the bound degenerates to zero with no price risk.
        return Ok(0.0);
    }

    let moments = ReturnMoments::from_latency(sigma, mu, latency);
    let f = |d: f64| truncated_ce(utility, d, &moments);

    // For mu >= 0 the search floor is 0; a negative drift shifts the domain
    // of the isoelastic expansion point to d > -m1 mu.
    let lo0 = (-mu * latency.m1).max(0.0);
    let f_lo = f(lo0);
    if f_lo >= 0.0 {
        // The root sits at or below the search floor, so the bound is the
        // floored value: exactly computable for the affine exponential case,
        // zero otherwise.
        return Ok(match utility {
            Utility::Cara { .. } => (lo0 - f_lo).max(0.0),
            _ => 0.0,
        });
    }
    let mut width = (sigma * latency.m2.sqrt()).max(1e-12);
    let mut expansions = 0;
    while f(lo0 + width) < 0.0 {
        width *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::RootBracketing {
                details: format!(
                    "no sign change up to d = {} (sigma={sigma}, mu={mu}, m1={}, m2={})",
                    lo0 + width,
                    latency.m1,
                    latency.m2
                ),
            });
        }
    }

    let mut lo = lo0;
    let mut hi = lo0 + width;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval at floating-point resolution
        }
        let val = f(mid);
        if val == 0.0 {
            return Ok(mid.max(0.0));
        }
        if val < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{cara_bound, crra_bound, BoundInputs};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_crra_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let sigma = rng.random_range(1e-5..0.01);
            let gamma = rng.random_range(1.0001..10.0);
            let m1 = rng.random_range(0.1..120.0);
            let m2 = m1 * m1 * rng.random_range(1.0..4.0);
            let closed = crra_bound(&BoundInputs::new(sigma, gamma, m1, m2)).unwrap().d;
            let root = ce_root_bound(
                &Utility::Crra { gamma },
                sigma,
                0.0,
                &LatencyMoments::from_mean_square(m1, m2),
            )
            .unwrap();
            assert!(
                (closed - root).abs() < 1e-10,
                "gap {} at sigma={sigma} gamma={gamma} m1={m1} m2={m2}",
                (closed - root).abs()
            );
        }
    }

    #[test]
    fn matches_cara_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..100 {
            let sigma = rng.random_range(1e-5..0.01);
            let gamma = rng.random_range(0.1..10.0);
            let m1 = rng.random_range(0.1..120.0);
            let m2 = m1 * m1 * rng.random_range(1.0..4.0);
            let closed = cara_bound(&BoundInputs::new(sigma, gamma, m1, m2), None).unwrap().d;
            let root = ce_root_bound(
                &Utility::Cara { gamma },
                sigma,
                0.0,
                &LatencyMoments::from_mean_square(m1, m2),
            )
            .unwrap();
            assert!((closed - root).abs() < 1e-8, "gap {}", (closed - root).abs());
        }
    }

    #[test]
    fn zero_sigma_gives_zero_bound() {
        let root = ce_root_bound(
            &Utility::Crra { gamma: 2.0 },
            0.0,
            0.0,
            &LatencyMoments::from_mean_square(10.0, 150.0),
        )
        .unwrap();
        assert_eq!(root, 0.0);
    }

    #[test]
    fn linear_utility_bound_is_zero_without_drift() {
        let root = ce_root_bound(
            &Utility::Linear,
            0.005,
            0.0,
            &LatencyMoments::from_mean_square(10.0, 150.0),
        )
        .unwrap();
        assert_eq!(root, 0.0);
    }

    #[test]
    fn cara_drift_bound_agrees_with_closed_form() {
        let latency = LatencyMoments::from_gamma(0.62, 0.05);
        let mut inputs = BoundInputs::new(0.0009, 2.0, latency.m1, latency.m2);
        inputs.mu = -2e-6;
        let closed = cara_bound(&inputs, Some(&latency)).unwrap().d;
        let root = ce_root_bound(&Utility::Cara { gamma: 2.0 }, 0.0009, -2e-6, &latency).unwrap();
        assert_relative_eq!(closed, root, epsilon = 1e-10);
    }

    #[test]
    fn utility_inverse_roundtrip() {
        for u in [
            Utility::Linear,
            Utility::Crra { gamma: 2.0 },
            Utility::Crra { gamma: 7.5 },
            Utility::Cara { gamma: 1.3 },
        ] {
            for r in [-0.5, -0.01, 0.0, 0.02, 0.8] {
                assert_relative_eq!(u.inverse(u.evaluate(r)), r, epsilon = 1e-12);
            }
        }
    }
}
