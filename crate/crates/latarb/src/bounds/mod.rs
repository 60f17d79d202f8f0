//! Arbitrage bounds under stochastic settlement latency.
//!
//! The bound `d` is the smallest instantaneous log price difference at which
//! a risk-averse arbitrageur is indifferent between trading and staying
//! idle, given that the sale settles only after a random latency during
//! which the sell-side price diffuses. This module provides
//!
//! - the CRRA closed form and the CARA closed form (with and without drift),
//! - a general certainty-equivalent root finder that both closed forms must
//!   agree with ([`ce_root_bound`]),
//! - the security/uncertainty decomposition of a bound,
//! - excess price differences over a bound matrix,
//! - implied risk aversion (the bound relation inverted for gamma), and
//! - the bound-versus-settlement-fee response curve.
//!
//! Units: sigma is per √minute, latency moments are in minutes and minutes²,
//! bounds are log returns (basis points = 1e4 × log return).

mod excess;
mod fee;
mod implied;
mod root;

pub use excess::{excess_differences, ExcessMatrices};
pub use fee::bound_fee_response;
pub use implied::{implied_gamma, implied_gamma_market};
pub use root::{ce_root_bound, ReturnMoments, Utility};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::{total_latency_moments, BlockTimeStats};

/// Log-return units to basis points.
pub const BP: f64 = 1e4;

/// Everything the bound formulas consume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Sell-side spot volatility, per √minute.
    pub sigma: f64,
    /// Risk-aversion coefficient.
    pub gamma: f64,
    /// First moment of total settlement latency, minutes.
    pub m1: f64,
    /// Second noncentral moment of total settlement latency, minutes².
    pub m2: f64,
    /// Drift of the sell-side log price, per minute.
    pub mu: f64,
}

impl BoundInputs {
    pub fn new(sigma: f64, gamma: f64, m1: f64, m2: f64) -> Self {
        BoundInputs { sigma, gamma, m1, m2, mu: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("must be >= 0, got {}", self.sigma),
            });
        }
        if !(self.m1 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "m1",
                reason: format!("must be > 0, got {}", self.m1),
            });
        }
        // Allow a hair of rounding slack: m2 >= m1^2 by Jensen.
        if !(self.m2 >= self.m1 * self.m1 * (1.0 - 1e-12)) {
            return Err(Error::InvalidParameter {
                name: "m2",
                reason: format!("must be >= m1^2 = {}, got {}", self.m1 * self.m1, self.m2),
            });
        }
        Ok(())
    }

    /// Latency variance implied by `(m1, m2)`.
    pub fn latency_variance(&self) -> f64 {
        (self.m2 - self.m1 * self.m1).max(0.0)
    }
}

/// Share of a bound attributable to confirmation requirements and to
/// latency randomness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `1 - d(B=1)/d(B)`.
    pub security_share: f64,
    /// `1 - d(all latency variances zero)/d`.
    pub uncertainty_share: f64,
}

/// A computed arbitrage bound with its inputs echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbBound {
    /// Bound in log-return units, >= 0.
    pub d: f64,
    /// Bound in basis points.
    pub bp: f64,
    pub decomposition: Option<Decomposition>,
    pub inputs: BoundInputs,
}

impl ArbBound {
    fn from_d(d: f64, inputs: BoundInputs) -> Self {
        let d = d.max(0.0);
        ArbBound { d, bp: d * BP, decomposition: None, inputs }
    }
}

/// CRRA (isoelastic utility) closed-form bound for zero drift:
///
/// ```text
/// d = sigma/2 * sqrt( g m1 + sqrt(g² m1² + 2 g (g+1) (g+2) m2) )
/// ```
///
/// Strictly increasing in each of sigma, gamma, m1, m2. Requires
/// `gamma > 1`; for other utilities use [`ce_root_bound`].
pub fn crra_bound(inputs: &BoundInputs) -> Result<ArbBound> {
    inputs.validate()?;
    if !(inputs.gamma > 1.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!(
                "CRRA closed form needs gamma > 1 (got {}); use ce_root_bound for the general case",
                inputs.gamma
            ),
        });
    }
    if inputs.mu != 0.0 {
        return Err(Error::InvalidParameter {
            name: "mu",
            reason: "CRRA closed form assumes zero drift".into(),
        });
    }
    Ok(ArbBound::from_d(crra_bound_raw(inputs.sigma, inputs.gamma, inputs.m1, inputs.m2), *inputs))
}

/// The bare CRRA formula without validation; callers guarantee
/// `gamma > 1`, `m1 > 0`, `m2 >= m1²`.
pub(crate) fn crra_bound_raw(sigma: f64, gamma: f64, m1: f64, m2: f64) -> f64 {
    let inner = (gamma * gamma * m1 * m1
        + 2.0 * gamma * (gamma + 1.0) * (gamma + 2.0) * m2)
        .sqrt();
    0.5 * sigma * (gamma * m1 + inner).sqrt()
}

/// CARA (exponential utility) closed-form bound.
///
/// Without drift: `d = g/2 sigma² m1 + g³/8 sigma⁴ m2`. With drift the full
/// expression needs the third and fourth central latency moments, supplied
/// through `higher` (see [`LatencyMoments::from_gamma`] for the gamma-model
/// closed forms).
pub fn cara_bound(inputs: &BoundInputs, higher: Option<&LatencyMoments>) -> Result<ArbBound> {
    inputs.validate()?;
    if !(inputs.gamma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("CARA bound needs gamma > 0, got {}", inputs.gamma),
        });
    }
    let g = inputs.gamma;
    let s2 = inputs.sigma * inputs.sigma;
    if inputs.mu == 0.0 {
        let d = 0.5 * g * s2 * inputs.m1 + g.powi(3) / 8.0 * s2 * s2 * inputs.m2;
        return Ok(ArbBound::from_d(d, *inputs));
    }
    let moments = higher.ok_or_else(|| Error::InvalidParameter {
        name: "higher",
        reason: "drift-adjusted CARA bound needs latency moments up to order 4".into(),
    })?;
    let ret = ReturnMoments::from_latency(inputs.sigma, inputs.mu, moments);
    // Root of d + m1 mu - g/2 mu2 + g²/6 mu3 - g³/24 mu4 = 0.
    let d = -inputs.m1 * inputs.mu + 0.5 * g * ret.central2 - g * g / 6.0 * ret.central3
        + g.powi(3) / 24.0 * ret.central4;
    Ok(ArbBound::from_d(d, *inputs))
}

/// Latency moments up to order four.
///
/// `m1` and `m2` are noncentral (mean and mean square); `central3` and
/// `central4` are central moments, only consumed by drift-adjusted bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyMoments {
    pub m1: f64,
    pub m2: f64,
    pub central3: f64,
    pub central4: f64,
}

impl LatencyMoments {
    /// Zero-drift bounds only need the first two moments.
    pub fn from_mean_square(m1: f64, m2: f64) -> Self {
        LatencyMoments { m1, m2, central3: 0.0, central4: 0.0 }
    }

    /// Closed-form moments of a gamma latency with shape `alpha` and rate
    /// `rate` (mean `alpha/rate`).
    pub fn from_gamma(alpha: f64, rate: f64) -> Self {
        let m1 = alpha / rate;
        let var = alpha / (rate * rate);
        LatencyMoments {
            m1,
            m2: var + m1 * m1,
            central3: 2.0 * alpha / rate.powi(3),
            central4: 3.0 * alpha * (alpha + 2.0) / rate.powi(4),
        }
    }

    /// Exponential latency with rate `lambda`.
    pub fn from_exponential(lambda: f64) -> Self {
        Self::from_gamma(1.0, lambda)
    }

    pub fn variance(&self) -> f64 {
        (self.m2 - self.m1 * self.m1).max(0.0)
    }

    /// Noncentral third moment.
    pub fn m3(&self) -> f64 {
        self.central3 + 3.0 * self.m1 * self.variance() + self.m1.powi(3)
    }
}

/// Decompose the CRRA bound into its security and uncertainty components.
///
/// Security: how much of the bound is caused by requiring `confirmations`
/// blocks instead of one. Uncertainty: how much is caused by latency being
/// random rather than deterministic. Returns `None` when the bound is zero.
pub fn decompose(
    sigma: f64,
    gamma: f64,
    e_tau: f64,
    v_tau: f64,
    blocks: &BlockTimeStats,
    confirmations: u32,
) -> Result<Option<Decomposition>> {
    let (m1, m2) = total_latency_moments(e_tau, v_tau, blocks, confirmations)?;
    let d = crra_bound(&BoundInputs::new(sigma, gamma, m1, m2))?.d;
    if d == 0.0 {
        return Ok(None);
    }
    let (m1_b1, m2_b1) = total_latency_moments(e_tau, v_tau, blocks, 1)?;
    let d_one_conf = crra_bound(&BoundInputs::new(sigma, gamma, m1_b1, m2_b1))?.d;
    let deterministic = BlockTimeStats::new(blocks.mean, 0.0)?;
    let (m1_det, m2_det) = total_latency_moments(e_tau, 0.0, &deterministic, confirmations)?;
    let d_det = crra_bound(&BoundInputs::new(sigma, gamma, m1_det, m2_det))?.d;
    Ok(Some(Decomposition {
        security_share: 1.0 - d_one_conf / d,
        uncertainty_share: 1.0 - d_det / d,
    }))
}
