//! Settlement-latency estimation.
//!
//! Fits exponential and gamma duration models to transaction confirmation
//! times by maximum likelihood, predicts conditional latency moments from
//! covariates (settlement fee per byte, mempool congestion), and compounds
//! exchange confirmation requirements into total-latency moments via
//! inter-block time statistics.
//!
//! The latency clock unit is minutes everywhere; spot volatility consumed
//! downstream must be in per-√minute units to match.

mod model;
mod records;

pub mod io;

pub use model::{fit, fit_design, lr_test, mspe, predict_moments, DurationFit, LrTest};
pub use records::{BlockRecord, TxRecord};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Day;

/// Model family for the confirmation-time distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Gamma with shape fixed to 1.
    Exponential,
    /// Gamma with free shape.
    Gamma,
}

/// A covariate column of the duration-model design matrix.
///
/// The transform is part of the identity of the column: fitted coefficients
/// are only meaningful together with the transform that produced the
/// regressor, so models persist the full schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    Intercept,
    /// `ln(1 + fee per byte)`, fee in Satoshi per byte.
    Log1pFeePerByte,
    /// `ln(mempool size)`, mempool size in number of pending transactions.
    LogMempoolSize,
}

impl Covariate {
    pub fn name(self) -> &'static str {
        match self {
            Covariate::Intercept => "intercept",
            Covariate::Log1pFeePerByte => "log1p_fee_per_byte",
            Covariate::LogMempoolSize => "log_mempool_size",
        }
    }

    fn value(self, rec: &TxRecord) -> f64 {
        match self {
            Covariate::Intercept => 1.0,
            Covariate::Log1pFeePerByte => rec.fee_per_byte.ln_1p(),
            Covariate::LogMempoolSize => (rec.mempool_size as f64).ln(),
        }
    }
}

/// Ordered covariate schema of a fitted model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSchema(pub Vec<Covariate>);

impl CovariateSchema {
    pub fn intercept_only() -> Self {
        CovariateSchema(vec![Covariate::Intercept])
    }

    /// Intercept, transformed fee per byte, log mempool size.
    pub fn standard() -> Self {
        CovariateSchema(vec![
            Covariate::Intercept,
            Covariate::Log1pFeePerByte,
            Covariate::LogMempoolSize,
        ])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn design_row(&self, rec: &TxRecord) -> Vec<f64> {
        self.0.iter().map(|c| c.value(rec)).collect()
    }

    /// Position of the fee covariate, if the schema has one.
    pub fn fee_index(&self) -> Option<usize> {
        self.0.iter().position(|c| *c == Covariate::Log1pFeePerByte)
    }

    /// Transform a raw fee per byte into the regressor value.
    pub fn fee_value(&self, fee_per_byte: f64) -> f64 {
        fee_per_byte.ln_1p()
    }

    /// Design row from raw covariate values, following this schema's
    /// column order and transforms.
    pub fn design_from_raw(&self, fee_per_byte: f64, mempool_size: f64) -> Vec<f64> {
        self.0
            .iter()
            .map(|c| match c {
                Covariate::Intercept => 1.0,
                Covariate::Log1pFeePerByte => fee_per_byte.ln_1p(),
                Covariate::LogMempoolSize => mempool_size.max(1.0).ln(),
            })
            .collect()
    }
}

/// Fitted duration model with diagnostics.
///
/// Rate parameterization: `beta_i = exp(-x_i' theta)`, so the conditional
/// moments are `E(tau|x) = alpha * exp(x' theta)` and
/// `V(tau|x) = alpha * exp(2 x' theta)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatencyModel {
    pub kind: ModelKind,
    /// Shape parameter; exactly 1 for the exponential model.
    pub alpha: f64,
    /// Coefficients aligned with `schema`.
    pub theta: Vec<f64>,
    pub schema: CovariateSchema,
    /// Day whose transactions the model was fitted on (walk-forward key).
    pub fit_day: Option<Day>,
    pub log_likelihood: f64,
    pub n_obs: usize,
    /// Standard errors for `theta` from the observed information matrix.
    pub theta_se: Vec<f64>,
    /// Standard error for `alpha` (gamma model only).
    pub alpha_se: Option<f64>,
    pub converged: bool,
    /// Set when the shape estimate ran into its upper bound, which happens
    /// when dispersion collapses (e.g. all latencies identical).
    pub near_degenerate: bool,
    pub gradient_norm: f64,
    pub iterations: usize,
}

impl LatencyModel {
    /// Number of free parameters (coefficients plus shape when free).
    pub fn n_params(&self) -> usize {
        self.theta.len() + usize::from(self.kind == ModelKind::Gamma)
    }
}

/// Sample moments of the time between consecutive blocks, in minutes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BlockTimeStats {
    /// Mean inter-block time, minutes.
    pub mean: f64,
    /// Sample variance of inter-block times, minutes².
    pub var: f64,
}

impl BlockTimeStats {
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if !(mean > 0.0) || !var.is_finite() || var < 0.0 {
            return Err(Error::InvalidParameter {
                name: "block_time_stats",
                reason: format!("need mean > 0 and var >= 0, got mean={mean}, var={var}"),
            });
        }
        Ok(BlockTimeStats { mean, var })
    }

    /// Estimate from sorted block timestamps (minutes since some epoch).
    ///
    /// Inter-block times are treated as i.i.d., so the sample mean and
    /// variance are the best predictors for future blocks.
    pub fn from_block_times(minutes: &[f64]) -> Result<Self> {
        if minutes.len() < 3 {
            return Err(Error::InvalidParameter {
                name: "block_times",
                reason: format!("need at least 3 block timestamps, got {}", minutes.len()),
            });
        }
        let mut sorted = minutes.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let diffs: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).collect();
        if diffs.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "block_times",
                reason: "fewer than 2 positive inter-block gaps".into(),
            });
        }
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        BlockTimeStats::new(mean, var)
    }
}

/// Compound the first-block latency with `b - 1` further confirmations.
///
/// `m1 = E(tau) + E(tau_B) (b-1)` and
/// `m2 = V(tau) + V(tau_B) (b-1)^2 + (E(tau_B) (b-1) + E(tau))^2`,
/// the second noncentral moment of the total waiting time. For `b = 1`
/// this collapses to `(E(tau), V(tau) + E(tau)^2)`.
pub fn total_latency_moments(
    e_tau: f64,
    v_tau: f64,
    blocks: &BlockTimeStats,
    confirmations: u32,
) -> Result<(f64, f64)> {
    if confirmations < 1 {
        return Err(Error::InvalidParameter {
            name: "confirmations",
            reason: "must be at least 1".into(),
        });
    }
    if !(e_tau > 0.0) || !v_tau.is_finite() || v_tau < 0.0 {
        return Err(Error::InvalidParameter {
            name: "latency_moments",
            reason: format!("need E > 0 and V >= 0, got E={e_tau}, V={v_tau}"),
        });
    }
    let extra = f64::from(confirmations - 1);
    let m1 = e_tau + blocks.mean * extra;
    let m2 = v_tau + blocks.var * extra * extra + (blocks.mean * extra + e_tau).powi(2);
    Ok((m1, m2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn total_moments_collapse_at_one_confirmation() {
        let blocks = BlockTimeStats::new(9.7, 94.09).unwrap();
        let (m1, m2) = total_latency_moments(10.0, 100.0, &blocks, 1).unwrap();
        assert_relative_eq!(m1, 10.0);
        assert_relative_eq!(m2, 100.0 + 100.0);
    }

    #[test]
    fn total_moments_hand_example() {
        // E=10, V=100, block mean 9.7, block var 94.09, B=3:
        // m1 = 10 + 9.7*2 = 29.4
        // m2 = 100 + 94.09*4 + 29.4^2 = 1340.72
        let blocks = BlockTimeStats::new(9.7, 94.09).unwrap();
        let (m1, m2) = total_latency_moments(10.0, 100.0, &blocks, 3).unwrap();
        assert_relative_eq!(m1, 29.4, max_relative = 1e-12);
        assert_relative_eq!(m2, 1340.72, max_relative = 1e-12);
    }

    #[test]
    fn total_moments_deterministic_latency() {
        // All variances zero: m2 must equal m1².
        let blocks = BlockTimeStats::new(9.7, 0.0).unwrap();
        let (m1, m2) = total_latency_moments(10.0, 0.0, &blocks, 5).unwrap();
        assert_relative_eq!(m2, m1 * m1, max_relative = 1e-12);
    }

    #[test]
    fn total_moments_increasing_in_confirmations() {
        let blocks = BlockTimeStats::new(9.7, 94.09).unwrap();
        let mut prev = total_latency_moments(8.0, 60.0, &blocks, 1).unwrap();
        for b in 2..=10 {
            let cur = total_latency_moments(8.0, 60.0, &blocks, b).unwrap();
            assert!(cur.0 > prev.0 && cur.1 > prev.1, "not increasing at B={b}");
            prev = cur;
        }
    }

    #[test]
    fn total_moments_rejects_zero_confirmations() {
        let blocks = BlockTimeStats::new(9.7, 94.09).unwrap();
        assert!(total_latency_moments(10.0, 100.0, &blocks, 0).is_err());
    }

    #[test]
    fn block_stats_from_times() {
        let times = [0.0, 10.0, 19.0, 31.0, 40.0];
        let stats = BlockTimeStats::from_block_times(&times).unwrap();
        // gaps 10, 9, 12, 9 -> mean 10, sample var 2
        assert_relative_eq!(stats.mean, 10.0);
        assert_relative_eq!(stats.var, 2.0);
    }
}
