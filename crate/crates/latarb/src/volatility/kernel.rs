//! One-sided Gaussian kernel smoothing and ISE bandwidth selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{Day, Minute, MINUTES_PER_DAY};
use crate::volatility::{BidSeries, VolConfig};

/// Precomputed one-sided Gaussian weights by lag, truncated at
/// `truncation * h` lags. Weights are normalized over whatever subset of
/// the window is actually available, so they always sum to one in use.
pub(crate) struct KernelWeights {
    weights: Vec<f64>,
}

impl KernelWeights {
    pub(crate) fn new(h: f64, truncation: f64) -> Self {
        let max_lag = (truncation * h).ceil() as usize;
        let weights = (0..=max_lag)
            .map(|lag| {
                let u = lag as f64 / h;
                (-0.5 * u * u).exp()
            })
            .collect();
        KernelWeights { weights }
    }

    /// Weighted average of the squared returns at lags `min_lag..` behind
    /// `idx`. `min_lag = 0` includes the return into the target minute;
    /// `min_lag = 1` is the one-step-ahead predictive version used for
    /// bandwidth scoring. `None` when no return is available in the window.
    pub(crate) fn smooth(&self, r2: &[Option<f64>], idx: usize, min_lag: usize) -> Option<f64> {
        let mut weighted = 0.0;
        let mut total = 0.0;
        for (lag, w) in self.weights.iter().enumerate().skip(min_lag) {
            if lag > idx {
                break;
            }
            if let Some(v) = r2[idx - lag] {
                weighted += w * v;
                total += w;
            }
        }
        (total > 0.0).then(|| weighted / total)
    }

    pub(crate) fn max_lag(&self) -> usize {
        self.weights.len() - 1
    }
}

/// Spot variance at minute `t` with bandwidth `h` (minutes).
///
/// One-sided: only returns at and before `t` carry weight, so the estimate
/// is invariant to any change of the data after `t`. Kernel weights are
/// normalized to sum to one over the available window; a single available
/// squared return therefore gets weight one.
pub fn spot_variance(series: &BidSeries, t: Minute, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter {
            name: "bandwidth",
            reason: format!("must be > 0, got {h}"),
        });
    }
    let idx = series.index_of(t).ok_or(Error::InsufficientHistory)?;
    let r2 = series.squared_returns();
    let weights = KernelWeights::new(h, 5.0);
    weights.smooth(&r2, idx, 0).ok_or(Error::InsufficientHistory)
}

/// Outcome of the daily bandwidth selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandwidthChoice {
    pub bandwidth: f64,
    /// Previous day had no usable returns; the default bandwidth was used.
    pub used_fallback: bool,
    /// `(h, ISE)` over the candidate grid; empty on fallback.
    pub ise_curve: Vec<(f64, f64)>,
}

/// Choose the bandwidth for `day` by minimizing the integrated squared
/// error of variance predictions on `day - 1`:
///
/// ```text
/// h* = argmin_h  sum_l ( r_l² - sigma²_l(h) )²
/// ```
///
/// The scored estimator excludes the target return itself (leave-one-out on
/// a one-sided kernel, i.e. lags start at one); including it would let
/// `h -> 0` reproduce each squared return exactly and always win. Minutes
/// are scored only if every candidate bandwidth can form a prediction
/// there, so the criterion compares like with like.
pub fn select_bandwidth(series: &BidSeries, day: Day, cfg: &VolConfig) -> BandwidthChoice {
    let fallback = BandwidthChoice {
        bandwidth: cfg.default_bandwidth,
        used_fallback: true,
        ise_curve: Vec::new(),
    };
    if cfg.bandwidth_grid.is_empty() {
        return fallback;
    }
    let r2 = series.squared_returns();
    let kernels: Vec<KernelWeights> = cfg
        .bandwidth_grid
        .iter()
        .map(|&h| KernelWeights::new(h, cfg.truncation))
        .collect();
    let min_window = kernels.iter().map(KernelWeights::max_lag).min().unwrap();

    let prev_first = day.prev().first_minute();
    let mut targets = Vec::new();
    for offset in 0..MINUTES_PER_DAY {
        let Some(idx) = series.index_of(Minute(prev_first.0 + offset)) else { continue };
        let Some(target) = r2[idx] else { continue };
        // Requires a prior return inside the narrowest candidate window.
        let has_history = (1..=min_window.min(idx)).any(|lag| r2[idx - lag].is_some());
        if has_history {
            targets.push((idx, target));
        }
    }
    if targets.is_empty() {
        return fallback;
    }

    let mut curve = Vec::with_capacity(kernels.len());
    let mut best: Option<(f64, f64)> = None;
    for (h, kernel) in cfg.bandwidth_grid.iter().zip(&kernels) {
        let mut ise = 0.0;
        for &(idx, target) in &targets {
            let pred = kernel.smooth(&r2, idx, 1).expect("history checked above");
            ise += (target - pred) * (target - pred);
        }
        curve.push((*h, ise));
        if best.is_none_or(|(_, b)| ise < b) {
            best = Some((*h, ise));
        }
    }
    BandwidthChoice {
        bandwidth: best.unwrap().0,
        used_fallback: false,
        ise_curve: curve,
    }
}
