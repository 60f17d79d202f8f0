//! Bound response to settlement fees.
//!
//! A higher settlement fee speeds up first inclusion, shortening the latency
//! and with it the bound. The curve `f -> d(f)` feeds the joint
//! quantity/fee optimization on the orderbook side.

use tracing::warn;

use crate::bounds::{crra_bound, BoundInputs};
use crate::error::{Error, Result};
use crate::latency::{predict_moments, total_latency_moments, BlockTimeStats, LatencyModel};

/// Evaluate the CRRA bound along a settlement-fee grid.
///
/// For each fee (in the model's raw fee units, e.g. Satoshi per byte) the
/// fee covariate of `x` is replaced by the transformed fee, the conditional
/// latency moments are recomputed, compounded over `confirmations`, and fed
/// into the closed-form bound. With a negative fee coefficient the curve is
/// non-increasing; a positive coefficient draws a warning since the
/// stochastic-dominance ordering behind the fee trade-off then fails.
pub fn bound_fee_response(
    model: &LatencyModel,
    x: &[f64],
    fee_grid: &[f64],
    sigma: f64,
    gamma: f64,
    blocks: &BlockTimeStats,
    confirmations: u32,
) -> Result<Vec<(f64, f64)>> {
    let fee_idx = model.schema.fee_index().ok_or_else(|| Error::InvalidParameter {
        name: "model",
        reason: "model has no fee covariate; fit with covariates first".into(),
    })?;
    if x.len() != model.theta.len() {
        return Err(Error::SchemaMismatch { expected: model.theta.len(), got: x.len() });
    }
    if model.theta[fee_idx] > 0.0 {
        warn!(
            coefficient = model.theta[fee_idx],
            "fee coefficient is positive; d(f) need not be monotone and the fee trade-off is ill-posed"
        );
    }
    let mut curve = Vec::with_capacity(fee_grid.len());
    for &fee in fee_grid {
        if !(fee >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "fee_grid",
                reason: format!("fees must be >= 0, got {fee}"),
            });
        }
        let mut xf = x.to_vec();
        xf[fee_idx] = model.schema.fee_value(fee);
        let (e_tau, v_tau) = predict_moments(model, &xf)?;
        let (m1, m2) = total_latency_moments(e_tau, v_tau, blocks, confirmations)?;
        let d = crra_bound(&BoundInputs::new(sigma, gamma, m1, m2))?.d;
        curve.push((fee, d));
    }
    Ok(curve)
}
