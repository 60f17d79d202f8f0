//! Spot volatility estimation.
//!
//! Minute-level spot variance per exchange from squared log bid returns,
//! smoothed with a one-sided Gaussian kernel. The bandwidth for day T is
//! chosen by minimizing the integrated squared error of one-step-ahead
//! variance predictions on day T-1, so no information from day T leaks into
//! its own bandwidth. Estimates are per minute; volatilities are per
//! √minute.

mod kernel;

pub use kernel::{select_bandwidth, spot_variance, BandwidthChoice};

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::orderbook::OrderbookSnapshot;
use crate::time::{Day, Minute, MINUTES_PER_DAY};

/// Log best-bid prices on a uniform minute grid with gap markers.
#[derive(Debug, Clone, PartialEq)]
pub struct BidSeries {
    pub exchange_id: String,
    start: Minute,
    log_bids: Vec<Option<f64>>,
}

impl BidSeries {
    /// Build from (minute, bid price) observations. Duplicate minutes keep
    /// the last observation; prices must be strictly positive and finite.
    pub fn from_observations(exchange_id: impl Into<String>, obs: &[(Minute, f64)]) -> Result<Self> {
        let exchange_id = exchange_id.into();
        if obs.is_empty() {
            return Err(Error::InvalidParameter {
                name: "observations",
                reason: format!("{exchange_id}: empty bid series"),
            });
        }
        for (m, p) in obs {
            if !(*p > 0.0) || !p.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "observations",
                    reason: format!("{exchange_id}: bad bid price {p} at {}", m.to_iso()),
                });
            }
        }
        let start = obs.iter().map(|(m, _)| *m).min().unwrap();
        let end = obs.iter().map(|(m, _)| *m).max().unwrap();
        let len = (end.0 - start.0 + 1) as usize;
        let mut log_bids = vec![None; len];
        for (m, p) in obs {
            log_bids[(m.0 - start.0) as usize] = Some(p.ln());
        }
        Ok(BidSeries { exchange_id, start, log_bids })
    }

    /// Extract the best-bid series of one exchange from minute snapshots.
    pub fn from_snapshots(exchange_id: &str, snapshots: &[OrderbookSnapshot]) -> Result<Self> {
        let obs: Vec<(Minute, f64)> = snapshots
            .iter()
            .filter(|s| s.exchange_id == exchange_id)
            .filter_map(|s| s.best_bid().map(|b| (s.timestamp, b)))
            .collect();
        Self::from_observations(exchange_id, &obs)
    }

    pub fn start(&self) -> Minute {
        self.start
    }

    /// One past the last grid minute.
    pub fn end(&self) -> Minute {
        Minute(self.start.0 + self.log_bids.len() as i64)
    }

    pub fn log_bid(&self, minute: Minute) -> Option<f64> {
        let idx = minute.0 - self.start.0;
        if idx < 0 {
            return None;
        }
        self.log_bids.get(idx as usize).copied().flatten()
    }

    pub(crate) fn index_of(&self, minute: Minute) -> Option<usize> {
        let idx = minute.0 - self.start.0;
        (idx >= 0 && (idx as usize) < self.log_bids.len()).then_some(idx as usize)
    }

    /// Squared one-minute log returns aligned with the grid. Entry `i` is
    /// the return into minute `start + i`; returns spanning gaps are `None`
    /// rather than interpolated.
    pub(crate) fn squared_returns(&self) -> Vec<Option<f64>> {
        let mut out = vec![None; self.log_bids.len()];
        for i in 1..self.log_bids.len() {
            if let (Some(prev), Some(cur)) = (self.log_bids[i - 1], self.log_bids[i]) {
                out[i] = Some((cur - prev) * (cur - prev));
            }
        }
        out
    }
}

/// One spot-volatility estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolPoint {
    pub minute: Minute,
    /// Spot volatility per √minute.
    pub sigma: f64,
    /// Excluded from downstream use: zero/invalid estimate or tail-trimmed.
    pub trimmed: bool,
}

/// Per-exchange spot-volatility estimates with per-day bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotVolSeries {
    pub exchange_id: String,
    pub points: Vec<VolPoint>,
    /// `(day, bandwidth, used_fallback)` per estimated day.
    pub bandwidths: Vec<(Day, f64, bool)>,
}

impl SpotVolSeries {
    /// Merge day estimates (same exchange) into one sample.
    pub fn merge(mut parts: Vec<SpotVolSeries>) -> Option<SpotVolSeries> {
        let first = parts.first()?.exchange_id.clone();
        let mut points = Vec::new();
        let mut bandwidths = Vec::new();
        for p in parts.drain(..) {
            debug_assert_eq!(p.exchange_id, first);
            points.extend(p.points);
            bandwidths.extend(p.bandwidths);
        }
        points.sort_by_key(|p| p.minute);
        bandwidths.sort_by_key(|b| b.0);
        Some(SpotVolSeries { exchange_id: first, points, bandwidths })
    }

    /// Retained (untrimmed) estimates.
    pub fn retained(&self) -> impl Iterator<Item = &VolPoint> {
        self.points.iter().filter(|p| !p.trimmed)
    }
}

/// Estimation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VolConfig {
    /// Candidate bandwidths for the daily ISE selection, minutes.
    pub bandwidth_grid: Vec<f64>,
    /// Bandwidth used when the previous day has no usable returns.
    pub default_bandwidth: f64,
    /// Kernel support truncation, in multiples of the bandwidth.
    pub truncation: f64,
    /// Tail-trim fraction applied per exchange on the pooled sample.
    pub trim_fraction: f64,
}

impl Default for VolConfig {
    fn default() -> Self {
        VolConfig {
            bandwidth_grid: vec![5.0, 10.0, 20.0, 30.0, 60.0, 120.0, 240.0],
            default_bandwidth: 60.0,
            truncation: 5.0,
            trim_fraction: 0.01,
        }
    }
}

/// Estimate one day of per-minute spot volatilities.
///
/// The bandwidth comes from the previous day's ISE criterion (falling back
/// to `cfg.default_bandwidth` with a warning when that day is unusable).
/// Estimates are produced for minutes with an observed quote and at least
/// one usable past return; zero-variance estimates are flagged as trimmed
/// immediately, tail trimming over the pooled sample is [`trim_tails`]'s
/// job afterwards.
pub fn estimate_day(series: &BidSeries, day: Day, cfg: &VolConfig) -> Result<SpotVolSeries> {
    let choice = select_bandwidth(series, day, cfg);
    if choice.used_fallback {
        warn!(
            exchange = series.exchange_id,
            day = day.to_iso(),
            "no usable previous-day returns; using default bandwidth"
        );
    }
    let r2 = series.squared_returns();
    let weights = kernel::KernelWeights::new(choice.bandwidth, cfg.truncation);
    let mut points = Vec::new();
    let first = day.first_minute();
    for offset in 0..MINUTES_PER_DAY {
        let minute = Minute(first.0 + offset);
        let Some(idx) = series.index_of(minute) else { continue };
        if series.log_bids[idx].is_none() {
            continue;
        }
        let Some(var) = weights.smooth(&r2, idx, 0) else { continue };
        let sigma = var.sqrt();
        points.push(VolPoint { minute, sigma, trimmed: !(sigma > 0.0) });
    }
    Ok(SpotVolSeries {
        exchange_id: series.exchange_id.clone(),
        points,
        bandwidths: vec![(day, choice.bandwidth, choice.used_fallback)],
    })
}

/// Mark the lowest and highest `frac` of valid estimates as trimmed.
///
/// Operates on whatever sample it is given; per the estimation protocol the
/// pipeline pools all days of one exchange before calling this.
pub fn trim_tails(points: &mut [VolPoint], frac: f64) {
    let mut order: Vec<usize> = (0..points.len()).filter(|&i| !points[i].trimmed).collect();
    let k = (order.len() as f64 * frac).floor() as usize;
    if k == 0 {
        return;
    }
    order.sort_by(|&a, &b| points[a].sigma.partial_cmp(&points[b].sigma).unwrap());
    for &i in order.iter().take(k) {
        points[i].trimmed = true;
    }
    for &i in order.iter().rev().take(k) {
        points[i].trimmed = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    pub(super) fn brownian_series(
        seed: u64,
        n_days: usize,
        sigma: f64,
        exchange: &str,
    ) -> BidSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut logp = 9.2_f64; // ~ 10k
        let mut obs = Vec::new();
        for i in 0..(n_days as i64 * MINUTES_PER_DAY) {
            logp += normal.sample(&mut rng);
            obs.push((Minute(i), logp.exp()));
        }
        BidSeries::from_observations(exchange, &obs).unwrap()
    }

    #[test]
    fn constant_series_estimates_zero_and_gets_flagged() {
        let obs: Vec<(Minute, f64)> = (0..2880).map(|i| (Minute(i), 100.0)).collect();
        let series = BidSeries::from_observations("EXA", &obs).unwrap();
        let day = estimate_day(&series, Day(1), &VolConfig::default()).unwrap();
        assert!(!day.points.is_empty());
        assert!(day.points.iter().all(|p| p.sigma == 0.0 && p.trimmed));
        assert_eq!(day.retained().count(), 0);
    }

    #[test]
    fn gbm_daily_mean_recovers_truth() {
        let sigma = 1e-3; // per sqrt-minute
        let mut errs = Vec::new();
        for seed in 0..20 {
            let series = brownian_series(seed, 2, sigma, "EXA");
            let day = estimate_day(&series, Day(1), &VolConfig::default()).unwrap();
            let retained: Vec<f64> = day.retained().map(|p| p.sigma).collect();
            assert!(!retained.is_empty());
            let mean = retained.iter().sum::<f64>() / retained.len() as f64;
            errs.push((mean - sigma).abs() / sigma);
        }
        let avg_err = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!(avg_err < 0.25, "average relative error {avg_err}");
    }

    #[test]
    fn one_sidedness_future_mutations_do_not_move_past_estimates() {
        let series = brownian_series(42, 2, 1e-3, "EXA");
        let cfg = VolConfig::default();
        let cut = Minute(MINUTES_PER_DAY + 700);

        // Re-randomize everything after the cut.
        let mut mutated_obs = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(999);
        for i in 0..(2 * MINUTES_PER_DAY) {
            let m = Minute(i);
            let b = series.log_bid(m).unwrap();
            let price = if m > cut { (b + rng.random_range(-0.2..0.2_f64)).exp() } else { b.exp() };
            mutated_obs.push((m, price));
        }
        let mutated = BidSeries::from_observations("EXA", &mutated_obs).unwrap();

        let day_a = estimate_day(&series, Day(1), &cfg).unwrap();
        let day_b = estimate_day(&mutated, Day(1), &cfg).unwrap();
        for (a, b) in day_a.points.iter().zip(day_b.points.iter()) {
            if a.minute <= cut {
                assert_eq!(a.sigma.to_bits(), b.sigma.to_bits(), "estimate moved at {}", a.minute.to_iso());
            }
        }
    }

    #[test]
    fn scale_equivariance_of_variance_estimates() {
        let series = brownian_series(7, 2, 1e-3, "EXA");
        let c: f64 = 3.0;
        let base = series.log_bid(Minute(0)).unwrap();
        let scaled_obs: Vec<(Minute, f64)> = (0..2 * MINUTES_PER_DAY)
            .filter_map(|i| {
                series.log_bid(Minute(i)).map(|b| (Minute(i), (base + c * (b - base)).exp()))
            })
            .collect();
        let scaled = BidSeries::from_observations("EXA", &scaled_obs).unwrap();
        let h = 30.0;
        let t = Minute(MINUTES_PER_DAY + 100);
        let v = spot_variance(&series, t, h).unwrap();
        let vs = spot_variance(&scaled, t, h).unwrap();
        assert_relative_eq!(vs, c * c * v, max_relative = 1e-10);
    }

    #[test]
    fn outlier_is_removed_by_tail_trim() {
        let series = brownian_series(11, 2, 1e-3, "EXA");
        let mut obs: Vec<(Minute, f64)> = (0..2 * MINUTES_PER_DAY)
            .filter_map(|i| series.log_bid(Minute(i)).map(|b| (Minute(i), b.exp())))
            .collect();
        // One flickering quote mid-day-2.
        let spike_idx = (MINUTES_PER_DAY + 720) as usize;
        obs[spike_idx].1 *= 1.25;
        let spiked = BidSeries::from_observations("EXA", &obs).unwrap();
        // A narrow kernel keeps the contamination local, so the spiked
        // minute itself lands in the top tail.
        let cfg = VolConfig { bandwidth_grid: vec![5.0], ..VolConfig::default() };
        let mut day = estimate_day(&spiked, Day(1), &cfg).unwrap();
        let spike_minute = obs[spike_idx].0;
        trim_tails(&mut day.points, 0.01);
        let p = day.points.iter().find(|p| p.minute == spike_minute).unwrap();
        assert!(p.trimmed, "outlier estimate survived the trim");
    }

    #[test]
    fn trim_marks_both_tails() {
        let mut points: Vec<VolPoint> = (0..200)
            .map(|i| VolPoint { minute: Minute(i), sigma: 1.0 + i as f64, trimmed: false })
            .collect();
        trim_tails(&mut points, 0.01);
        assert!(points[0].trimmed && points[1].trimmed);
        assert!(points[198].trimmed && points[199].trimmed);
        assert_eq!(points.iter().filter(|p| p.trimmed).count(), 4);
    }
}
