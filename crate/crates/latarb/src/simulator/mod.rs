//! Monte Carlo oracle for the return distribution and the bounds.
//!
//! Simulates settlement returns `r = delta + mu tau + sigma sqrt(tau) Z`
//! with exact terminal-value sampling (a single Gaussian per path; valid
//! because sigma is constant over the settlement window), validates the
//! variance-mean mixture identities and the exponential-latency Laplace
//! limit, and estimates certainty equivalents to check the bound formulas
//! at their indifference points.
//!
//! Path generation is sharded with counter-based RNG streams: shard `s`
//! draws from stream `s` of a ChaCha generator keyed by the seed, so the
//! sample is reproducible bit for bit regardless of thread count.
//!
//! Volatility is constant per settlement window. Time-varying volatility
//! would enter through a time change of the Brownian clock (the mixture
//! then runs on transformed latency); the hook is the `sigma` field here,
//! but such dynamics are deliberately not modeled.

mod ce;
mod ks;

pub use ce::{ce_estimate, CeReport};
pub use ks::{laplace_check, laplace_cdf, LaplaceCheck};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma as GammaDist, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::LatencyMoments;
use crate::error::{Error, Result};

const SHARD: usize = 1 << 16;

/// Settlement-latency distribution.
///
/// Gamma is parameterized as shape/rate so that the mean is `shape / rate`,
/// matching the duration-model convention; every boundary that talks to a
/// scale-parameterized sampler converts explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum LatencyLaw {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    /// Resample uniformly from an observed latency pool.
    Empirical { sample: Vec<f64> },
}

impl LatencyLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            LatencyLaw::Exponential { rate } => *rate > 0.0,
            LatencyLaw::Gamma { shape, rate } => *shape > 0.0 && *rate > 0.0,
            LatencyLaw::Empirical { sample } => {
                !sample.is_empty() && sample.iter().all(|t| *t > 0.0 && t.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "latency_law",
                reason: format!("{self:?} has non-positive parameters or an empty sample"),
            })
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            LatencyLaw::Exponential { rate } => 1.0 / rate,
            LatencyLaw::Gamma { shape, rate } => shape / rate,
            LatencyLaw::Empirical { sample } => {
                sample.iter().sum::<f64>() / sample.len() as f64
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            LatencyLaw::Exponential { rate } => 1.0 / (rate * rate),
            LatencyLaw::Gamma { shape, rate } => shape / (rate * rate),
            LatencyLaw::Empirical { sample } => {
                let m = self.mean();
                sample.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / sample.len() as f64
            }
        }
    }

    /// Latency moments up to order four, for the analytic bound formulas.
    pub fn latency_moments(&self) -> LatencyMoments {
        match self {
            LatencyLaw::Exponential { rate } => LatencyMoments::from_exponential(*rate),
            LatencyLaw::Gamma { shape, rate } => LatencyMoments::from_gamma(*shape, *rate),
            LatencyLaw::Empirical { sample } => {
                let n = sample.len() as f64;
                let m1 = self.mean();
                let m2 = sample.iter().map(|t| t * t).sum::<f64>() / n;
                let c3 = sample.iter().map(|t| (t - m1).powi(3)).sum::<f64>() / n;
                let c4 = sample.iter().map(|t| (t - m1).powi(4)).sum::<f64>() / n;
                LatencyMoments { m1, m2, central3: c3, central4: c4 }
            }
        }
    }

    fn sampler(&self) -> LatencySampler<'_> {
        match self {
            LatencyLaw::Exponential { rate } => LatencySampler::Exp(Exp::new(*rate).unwrap()),
            LatencyLaw::Gamma { shape, rate } => {
                // rand_distr::Gamma takes shape/scale; scale = 1/rate.
                LatencySampler::Gamma(GammaDist::new(*shape, 1.0 / rate).unwrap())
            }
            LatencyLaw::Empirical { sample } => LatencySampler::Empirical(sample),
        }
    }
}

enum LatencySampler<'a> {
    Exp(Exp<f64>),
    Gamma(GammaDist<f64>),
    Empirical(&'a [f64]),
}

impl LatencySampler<'_> {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            LatencySampler::Exp(d) => d.sample(rng),
            LatencySampler::Gamma(d) => d.sample(rng),
            LatencySampler::Empirical(pool) => pool[rng.random_range(0..pool.len())],
        }
    }
}

/// Simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub paths: usize,
    /// Sell-side spot volatility, per √minute.
    pub sigma: f64,
    /// Drift per minute.
    pub mu: f64,
    /// Instantaneous return earned at execution.
    pub delta: f64,
    pub latency: LatencyLaw,
    /// Grid step for visual path traces only; terminal sampling is exact.
    pub step_minutes: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 1 {
            return Err(Error::InvalidParameter {
                name: "paths",
                reason: "need at least one path".into(),
            });
        }
        if !(self.step_minutes > 0.0) {
            return Err(Error::InvalidParameter {
                name: "step_minutes",
                reason: format!("must be > 0, got {}", self.step_minutes),
            });
        }
        if !(self.sigma >= 0.0) || !self.mu.is_finite() || !self.delta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sim_config",
                reason: "sigma must be >= 0 and mu, delta finite".into(),
            });
        }
        self.latency.validate()
    }
}

/// Draw i.i.d. settlement returns under the config.
///
/// Deterministic for a fixed seed and config: shard `s` of 2^16 paths uses
/// RNG stream `s`, shards are concatenated in order, and each path draws
/// its latency first and its Gaussian second.
pub fn sample_returns(config: &SimConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let shards = config.paths.div_ceil(SHARD);
    let out: Vec<Vec<f64>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(s as u64);
            let sampler = config.latency.sampler();
            let count = SHARD.min(config.paths - s * SHARD);
            let mut shard = Vec::with_capacity(count);
            for _ in 0..count {
                let tau = sampler.draw(&mut rng);
                let z: f64 = StandardNormal.sample(&mut rng);
                shard.push(config.delta + config.mu * tau + config.sigma * tau.sqrt() * z);
            }
            shard
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// One discretized price path stopped at its drawn latency, for plots.
/// Terminal values in quantitative use come from [`sample_returns`].
pub fn sample_trace(config: &SimConfig, n_paths: usize) -> Result<Vec<Vec<(f64, f64)>>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(u64::MAX); // keep traces off the estimation streams
    let sampler = config.latency.sampler();
    let mut traces = Vec::with_capacity(n_paths);
    for _ in 0..n_paths {
        let tau = sampler.draw(&mut rng);
        let steps = (tau / config.step_minutes).ceil() as usize;
        let mut path = Vec::with_capacity(steps + 1);
        let mut x = config.delta;
        let mut t = 0.0;
        path.push((t, x));
        for _ in 0..steps {
            let dt = config.step_minutes.min(tau - t);
            let z: f64 = StandardNormal.sample(&mut rng);
            x += config.mu * dt + config.sigma * dt.sqrt() * z;
            t += dt;
            path.push((t, x));
        }
        traces.push(path);
    }
    Ok(traces)
}

/// Kahan-compensated sum.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Sample-versus-analytic check of the mixture mean and variance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentCheck {
    pub mean: f64,
    pub mean_se: f64,
    pub expected_mean: f64,
    pub mean_ok: bool,
    pub variance: f64,
    pub variance_se: f64,
    pub expected_variance: f64,
    pub variance_ok: bool,
    pub n: usize,
}

/// Compare the sample mean/variance of simulated returns with
/// `E(r) = delta + mu E(tau)` and `V(r) = sigma² E(tau) + mu² V(tau)`
/// at the 3-standard-error level.
pub fn moment_check(config: &SimConfig, sample: &[f64]) -> MomentCheck {
    let n = sample.len();
    let nf = n as f64;
    let mean = compensated_sum(sample.iter().copied()) / nf;
    let m2 = compensated_sum(sample.iter().map(|r| (r - mean) * (r - mean))) / nf;
    let m4 = compensated_sum(sample.iter().map(|r| (r - mean).powi(4))) / nf;
    let mean_se = (m2 / nf).sqrt();
    let variance_se = ((m4 - m2 * m2).max(0.0) / nf).sqrt();
    let expected_mean = config.delta + config.mu * config.latency.mean();
    let expected_variance =
        config.sigma * config.sigma * config.latency.mean() + config.mu * config.mu * config.latency.variance();
    MomentCheck {
        mean,
        mean_se,
        expected_mean,
        mean_ok: (mean - expected_mean).abs() <= 3.0 * mean_se,
        variance: m2,
        variance_se,
        expected_variance,
        variance_ok: (m2 - expected_variance).abs() <= 3.0 * variance_se,
        n,
    }
}
