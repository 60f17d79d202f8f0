//! Maximum-likelihood fitting of the duration models.
//!
//! The gamma regression has density
//! `pi(tau | theta) = beta^alpha / Gamma(alpha) * tau^(alpha-1) * exp(-beta tau)`
//! with `beta_i = exp(-x_i' theta)`. The exponential model is the `alpha = 1`
//! restriction. Optimization runs on `(theta, ln alpha)` so the shape
//! constraint never binds, with analytic gradient and Hessian:
//!
//! ```text
//! dl/dtheta_j = sum_i x_ij (tau_i beta_i - alpha)
//! dl/dalpha   = sum_i ln(beta_i tau_i) - n psi(alpha)
//! ```
//!
//! Standard errors come from the observed information in the original
//! `(theta, alpha)` parameterization.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::{digamma, ln_gamma};
use tracing::warn;

use crate::error::{Error, Result};
use crate::latency::{CovariateSchema, LatencyModel, ModelKind, TxRecord};

const GRAD_TOL: f64 = 1e-6;
const MAX_ITER: usize = 500;
/// Bounds for ln(alpha); the upper bound only binds when the data carry
/// essentially no dispersion and the shape estimate diverges.
const LOG_ALPHA_MIN: f64 = -20.0;
const LOG_ALPHA_MAX: f64 = 20.0;
/// ln(alpha) above which a fit is flagged near-degenerate.
const LOG_ALPHA_DEGENERATE: f64 = 15.0;

/// Raw output of a design-matrix fit.
#[derive(Debug, Clone)]
pub struct DurationFit {
    pub kind: ModelKind,
    pub alpha: f64,
    pub theta: Vec<f64>,
    pub log_likelihood: f64,
    pub theta_se: Vec<f64>,
    pub alpha_se: Option<f64>,
    pub converged: bool,
    pub near_degenerate: bool,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Fit a duration model to transaction records.
///
/// Requires at least 50 records. Covariate columns with (numerically) zero
/// variance are dropped with a warning; the returned schema reflects what
/// was actually used.
pub fn fit(records: &[TxRecord], kind: ModelKind, with_covariates: bool) -> Result<LatencyModel> {
    if records.len() < 50 {
        return Err(Error::InvalidParameter {
            name: "records",
            reason: format!("need at least 50 records with positive latency, got {}", records.len()),
        });
    }
    let schema = if with_covariates {
        CovariateSchema::standard()
    } else {
        CovariateSchema::intercept_only()
    };
    let tau: Vec<f64> = records.iter().map(TxRecord::latency_minutes).collect();
    if tau.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "records",
            reason: "all latencies must be strictly positive".into(),
        });
    }
    let mut design: Vec<Vec<f64>> = records.iter().map(|r| schema.design_row(r)).collect();
    if design.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "covariates",
            reason: "design matrix contains non-finite values".into(),
        });
    }

    // Drop constant non-intercept columns; they are collinear with the intercept.
    let mut keep = Vec::new();
    let n = design.len() as f64;
    for (j, cov) in schema.0.iter().enumerate() {
        if *cov == super::Covariate::Intercept {
            keep.push(j);
            continue;
        }
        let mean = design.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = design.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        if var < 1e-12 {
            warn!(covariate = cov.name(), "dropping zero-variance covariate");
        } else {
            keep.push(j);
        }
    }
    let schema = CovariateSchema(keep.iter().map(|&j| schema.0[j]).collect());
    if keep.len() < design[0].len() {
        design = design
            .iter()
            .map(|r| keep.iter().map(|&j| r[j]).collect())
            .collect();
    }

    let fit = fit_design(&design, &tau, kind)?;
    Ok(LatencyModel {
        kind,
        alpha: fit.alpha,
        theta: fit.theta,
        schema,
        fit_day: None,
        log_likelihood: fit.log_likelihood,
        n_obs: records.len(),
        theta_se: fit.theta_se,
        alpha_se: fit.alpha_se,
        converged: fit.converged,
        near_degenerate: fit.near_degenerate,
        gradient_norm: fit.gradient_norm,
        iterations: fit.iterations,
    })
}

/// Fit directly on a design matrix (first column is usually the intercept).
///
/// This is the entry point for simulation studies where the regressors are
/// already transformed.
pub fn fit_design(design: &[Vec<f64>], tau: &[f64], kind: ModelKind) -> Result<DurationFit> {
    let n = tau.len();
    if n == 0 || design.len() != n {
        return Err(Error::InvalidParameter {
            name: "design",
            reason: format!("design rows ({}) must match tau length ({n})", design.len()),
        });
    }
    let k = design[0].len();
    if k == 0 || design.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidParameter {
            name: "design",
            reason: "design matrix must be rectangular with at least one column".into(),
        });
    }

    // Moment-matching start: intercept at ln(mean tau), alpha at 1.
    let mean_tau = tau.iter().sum::<f64>() / n as f64;
    let mut theta = vec![0.0; k];
    theta[0] = mean_tau.ln();
    let mut log_alpha: f64 = 0.0;
    let free_alpha = kind == ModelKind::Gamma;

    let mut ll = loglik(design, tau, &theta, log_alpha.exp());
    let mut iterations = 0;
    let mut converged = false;
    let mut clamped_high = false;
    let mut grad_norm = f64::INFINITY;

    for iter in 0..MAX_ITER {
        iterations = iter + 1;
        let grad = score_reparam(design, tau, &theta, log_alpha, free_alpha);
        grad_norm = inf_norm(&grad);
        // If the only unresolved direction is a shape pushed to its ceiling,
        // the data have no dispersion left to identify alpha.
        let theta_norm = inf_norm(&grad[..k]);
        clamped_high = free_alpha && log_alpha >= LOG_ALPHA_MAX && grad[k] > 0.0;
        if grad_norm < GRAD_TOL || (clamped_high && theta_norm < GRAD_TOL) {
            converged = grad_norm < GRAD_TOL;
            break;
        }

        let hess = hessian_reparam(design, tau, &theta, log_alpha, free_alpha, &grad);
        let mut dir = solve_linear(&neg(&hess), &grad).unwrap_or_default();
        let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if dir.is_empty() || !slope.is_finite() || slope <= 0.0 {
            // Hessian not usable; fall back to scaled steepest ascent.
            let scale = 1.0 / (1.0 + grad_norm);
            dir = grad.iter().map(|g| g * scale).collect();
        }

        // Backtracking Armijo line search on the log-likelihood. Near the
        // optimum the predicted gain drops below the resolution of the
        // log-likelihood itself; a step that keeps it within rounding noise
        // is then accepted so the Newton step can still zero the gradient.
        let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        let noise = 16.0 * f64::EPSILON * ll.abs().max(1.0);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut theta_new = theta.clone();
            for (t, d) in theta_new.iter_mut().zip(&dir) {
                *t += step * d;
            }
            let log_alpha_new = if free_alpha {
                (log_alpha + step * dir[k]).clamp(LOG_ALPHA_MIN, LOG_ALPHA_MAX)
            } else {
                log_alpha
            };
            let ll_new = loglik(design, tau, &theta_new, log_alpha_new.exp());
            let armijo = ll_new >= ll + 1e-4 * step * slope;
            let within_noise = slope.abs() <= noise && ll_new >= ll - noise;
            if ll_new.is_finite() && (armijo || within_noise) {
                theta = theta_new;
                log_alpha = log_alpha_new;
                ll = ll_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let alpha = log_alpha.exp();
    let near_degenerate = free_alpha && log_alpha >= LOG_ALPHA_DEGENERATE;
    if !converged && !(clamped_high || near_degenerate) {
        return Err(Error::NonConvergence {
            details: format!(
                "gradient norm {grad_norm:.3e} after {iterations} iterations (tolerance {GRAD_TOL:.0e}), \
                 log-likelihood {ll:.6}"
            ),
        });
    }

    let (theta_se, alpha_se) = standard_errors(design, tau, &theta, alpha, free_alpha);
    Ok(DurationFit {
        kind,
        alpha: if free_alpha { alpha } else { 1.0 },
        theta,
        log_likelihood: ll,
        theta_se,
        alpha_se: if free_alpha { alpha_se } else { None },
        converged,
        near_degenerate,
        gradient_norm: grad_norm,
        iterations,
    })
}

/// Gamma log-likelihood at `(theta, alpha)`.
pub(crate) fn loglik(design: &[Vec<f64>], tau: &[f64], theta: &[f64], alpha: f64) -> f64 {
    let n = tau.len() as f64;
    let mut acc = 0.0;
    for (x, t) in design.iter().zip(tau) {
        let xb: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
        let beta = (-xb).exp();
        acc += -alpha * xb + (alpha - 1.0) * t.ln() - beta * t;
    }
    acc - n * ln_gamma(alpha)
}

/// Analytic score in the original `(theta, alpha)` parameterization.
pub(crate) fn score(design: &[Vec<f64>], tau: &[f64], theta: &[f64], alpha: f64) -> Vec<f64> {
    let k = theta.len();
    let mut g = vec![0.0; k + 1];
    let mut log_beta_tau = 0.0;
    for (x, t) in design.iter().zip(tau) {
        let xb: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
        let beta = (-xb).exp();
        let resid = t * beta - alpha;
        for (gj, xj) in g[..k].iter_mut().zip(x) {
            *gj += xj * resid;
        }
        log_beta_tau += (beta * t).ln();
    }
    g[k] = log_beta_tau - tau.len() as f64 * digamma(alpha);
    g
}

/// Score in `(theta, ln alpha)`, truncated to `k` entries for fixed alpha.
fn score_reparam(
    design: &[Vec<f64>],
    tau: &[f64],
    theta: &[f64],
    log_alpha: f64,
    free_alpha: bool,
) -> Vec<f64> {
    let alpha = log_alpha.exp();
    let mut g = score(design, tau, theta, alpha);
    let k = theta.len();
    if free_alpha {
        g[k] *= alpha;
        g
    } else {
        g.truncate(k);
        g
    }
}

/// Hessian in `(theta, ln alpha)`.
fn hessian_reparam(
    design: &[Vec<f64>],
    tau: &[f64],
    theta: &[f64],
    log_alpha: f64,
    free_alpha: bool,
    grad: &[f64],
) -> Vec<Vec<f64>> {
    let alpha = log_alpha.exp();
    let k = theta.len();
    let dim = k + usize::from(free_alpha);
    let mut h = vec![vec![0.0; dim]; dim];
    let mut sum_x = vec![0.0; k];
    for (x, t) in design.iter().zip(tau) {
        let xb: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
        let w = (-xb).exp() * t;
        for i in 0..k {
            for j in 0..=i {
                h[i][j] -= w * x[i] * x[j];
            }
            sum_x[i] += x[i];
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            h[i][j] = h[j][i];
        }
    }
    if free_alpha {
        for i in 0..k {
            h[i][k] = -alpha * sum_x[i];
            h[k][i] = h[i][k];
        }
        h[k][k] = grad[k] - tau.len() as f64 * alpha * alpha * trigamma(alpha);
    }
    h
}

/// Standard errors from the observed information in `(theta, alpha)`.
fn standard_errors(
    design: &[Vec<f64>],
    tau: &[f64],
    theta: &[f64],
    alpha: f64,
    free_alpha: bool,
) -> (Vec<f64>, Option<f64>) {
    let k = theta.len();
    let dim = k + usize::from(free_alpha);
    let mut info = vec![vec![0.0; dim]; dim];
    let mut sum_x = vec![0.0; k];
    for (x, t) in design.iter().zip(tau) {
        let xb: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
        let w = (-xb).exp() * t;
        for i in 0..k {
            for j in 0..=i {
                info[i][j] += w * x[i] * x[j];
            }
            sum_x[i] += x[i];
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            info[i][j] = info[j][i];
        }
    }
    if free_alpha {
        for i in 0..k {
            info[i][k] = sum_x[i];
            info[k][i] = sum_x[i];
        }
        info[k][k] = tau.len() as f64 * trigamma(alpha);
    }
    match invert(&info) {
        Some(cov) => {
            let se: Vec<f64> = (0..k).map(|i| cov[i][i].max(0.0).sqrt()).collect();
            let alpha_se = free_alpha.then(|| cov[k][k].max(0.0).sqrt());
            (se, alpha_se)
        }
        None => {
            warn!("observed information is singular; standard errors unavailable");
            (vec![f64::NAN; k], free_alpha.then_some(f64::NAN))
        }
    }
}

/// Likelihood-ratio test of a restricted against an unrestricted model.
#[derive(Debug, Clone, Copy)]
pub struct LrTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// `2 (l_u - l_r)` against the chi-square with dof equal to the
/// parameter-count difference. Both models must be fitted on the same data
/// and the restricted model must be nested in the unrestricted one.
pub fn lr_test(restricted: &LatencyModel, unrestricted: &LatencyModel) -> Result<LrTest> {
    if restricted.n_obs != unrestricted.n_obs {
        return Err(Error::NotNested {
            reason: format!(
                "models fitted on different sample sizes ({} vs {})",
                restricted.n_obs, unrestricted.n_obs
            ),
        });
    }
    let nested_kind = restricted.kind == unrestricted.kind
        || (restricted.kind == ModelKind::Exponential && unrestricted.kind == ModelKind::Gamma);
    let nested_schema = restricted
        .schema
        .0
        .iter()
        .all(|c| unrestricted.schema.0.contains(c));
    if !nested_kind || !nested_schema {
        return Err(Error::NotNested {
            reason: "restricted parameters are not a subset of the unrestricted model".into(),
        });
    }
    let dof = unrestricted.n_params() - restricted.n_params();
    let statistic = (2.0 * (unrestricted.log_likelihood - restricted.log_likelihood)).max(0.0);
    let p_value = if dof == 0 {
        1.0
    } else {
        let chi = ChiSquared::new(dof as f64).expect("dof > 0");
        1.0 - chi.cdf(statistic)
    };
    Ok(LrTest { statistic, dof, p_value })
}

/// Conditional latency moments `(E, V)` at covariates `x`.
///
/// `E = alpha exp(x' theta)`, `V = alpha exp(2 x' theta)`, so `V alpha = E^2`
/// identically.
pub fn predict_moments(model: &LatencyModel, x: &[f64]) -> Result<(f64, f64)> {
    if x.len() != model.theta.len() {
        return Err(Error::SchemaMismatch {
            expected: model.theta.len(),
            got: x.len(),
        });
    }
    let xb: f64 = x.iter().zip(&model.theta).map(|(a, b)| a * b).sum();
    let e = model.alpha * xb.exp();
    let v = model.alpha * (2.0 * xb).exp();
    Ok((e, v))
}

/// Mean squared prediction error of the conditional mean, minutes².
pub fn mspe(model: &LatencyModel, records: &[TxRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidParameter {
            name: "records",
            reason: "mspe needs at least one record".into(),
        });
    }
    let mut acc = 0.0;
    for rec in records {
        let x = model.schema.design_row(rec);
        let (e, _) = predict_moments(model, &x)?;
        acc += (rec.latency_minutes() - e).powi(2);
    }
    Ok(acc / records.len() as f64)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn neg(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    m.iter().map(|row| row.iter().map(|v| -v).collect()).collect()
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
fn solve_linear(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in (col + 1)..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in (row + 1)..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}

/// Invert a small symmetric matrix by Gauss-Jordan.
fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col];
            if f != 0.0 {
                let src = m[col].clone();
                for (v, s) in m[row].iter_mut().zip(&src) {
                    *v -= f * s;
                }
            }
        }
    }
    Some(m.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Trigamma via the recurrence `psi'(x) = psi'(x+1) + 1/x^2` and the
/// asymptotic series for large arguments.
pub(crate) fn trigamma(x: f64) -> f64 {
    let mut acc = 0.0;
    let mut z = x;
    while z < 6.0 {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    acc + inv * (1.0 + inv * (0.5 + inv * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0)))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latency::ModelKind;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma as GammaDist, Normal};

    fn sim_gamma(
        rng: &mut impl Rng,
        n: usize,
        alpha: f64,
        theta: &[f64],
    ) -> (Vec<Vec<f64>>, Vec<f64>) {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut design = Vec::with_capacity(n);
        let mut tau = Vec::with_capacity(n);
        for _ in 0..n {
            let mut x = vec![1.0];
            for _ in 1..theta.len() {
                x.push(normal.sample(rng));
            }
            let xb: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
            let rate = (-xb).exp();
            let g = GammaDist::new(alpha, 1.0 / rate).unwrap();
            tau.push(g.sample(rng));
            design.push(x);
        }
        (design, tau)
    }

    #[test]
    fn exponential_intercept_only_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c: f64 = 1.4;
        let n = 10_000;
        let tau: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().ln() * c.exp()).collect();
        let design: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0]).collect();
        let fit = fit_design(&design, &tau, ModelKind::Exponential).unwrap();
        // Intercept-only exponential MLE is ln(mean tau) exactly.
        let mean = tau.iter().sum::<f64>() / n as f64;
        assert_relative_eq!(fit.theta[0], mean.ln(), max_relative = 1e-8);
        assert!((fit.theta[0] - c).abs() < 3.0 * fit.theta_se[0]);
        assert!(fit.converged);
    }

    #[test]
    fn gamma_with_covariates_recovers_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = [1.19, -0.22, 0.31];
        let alpha = 0.62;
        let (design, tau) = sim_gamma(&mut rng, 10_000, alpha, &truth);
        let fit = fit_design(&design, &tau, ModelKind::Gamma).unwrap();
        assert!(fit.converged, "gradient norm {}", fit.gradient_norm);
        for (j, t) in truth.iter().enumerate() {
            assert!(
                (fit.theta[j] - t).abs() < 3.0 * fit.theta_se[j],
                "theta[{j}] = {} vs {t} (se {})",
                fit.theta[j],
                fit.theta_se[j]
            );
        }
        let alpha_se = fit.alpha_se.unwrap();
        assert!((fit.alpha - alpha).abs() < 3.0 * alpha_se);
    }

    #[test]
    fn score_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (design, tau) = sim_gamma(&mut rng, 500, 0.8, &[0.9, -0.3, 0.2]);
        let theta = [0.7, -0.1, 0.15];
        let alpha = 0.9;
        let g = score(&design, &tau, &theta, alpha);
        let eps = 1e-6;
        for j in 0..3 {
            let mut hi = theta.to_vec();
            let mut lo = theta.to_vec();
            hi[j] += eps;
            lo[j] -= eps;
            let fd = (loglik(&design, &tau, &hi, alpha) - loglik(&design, &tau, &lo, alpha)) / (2.0 * eps);
            assert_relative_eq!(g[j], fd, max_relative = 1e-5);
        }
        let fd_a = (loglik(&design, &tau, &theta, alpha + eps)
            - loglik(&design, &tau, &theta, alpha - eps))
            / (2.0 * eps);
        assert_relative_eq!(g[3], fd_a, max_relative = 1e-5);
    }

    #[test]
    fn fitted_optimum_dominates_neighborhood() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (design, tau) = sim_gamma(&mut rng, 2_000, 0.7, &[1.0, -0.2]);
        let fit = fit_design(&design, &tau, ModelKind::Gamma).unwrap();
        let ll_opt = loglik(&design, &tau, &fit.theta, fit.alpha);
        for _ in 0..25 {
            let mut theta = fit.theta.clone();
            for t in theta.iter_mut() {
                *t += rng.random_range(-0.05..0.05);
            }
            let alpha = fit.alpha * (1.0 + rng.random_range(-0.05..0.05));
            assert!(loglik(&design, &tau, &theta, alpha) <= ll_opt + 1e-9);
        }
    }

    #[test]
    fn exponential_never_beats_gamma_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (design, tau) = sim_gamma(&mut rng, 1_000, 0.6, &[1.1, -0.25]);
        let exp_fit = fit_design(&design, &tau, ModelKind::Exponential).unwrap();
        let gamma_fit = fit_design(&design, &tau, ModelKind::Gamma).unwrap();
        assert!(exp_fit.log_likelihood <= gamma_fit.log_likelihood + 1e-8);
    }

    #[test]
    fn constant_latency_flags_near_degenerate() {
        let design: Vec<Vec<f64>> = (0..200).map(|_| vec![1.0]).collect();
        let tau = vec![5.0; 200];
        let fit = fit_design(&design, &tau, ModelKind::Gamma).unwrap();
        assert!(fit.near_degenerate);
        // Conditional mean still matches the data.
        assert_relative_eq!(fit.alpha * fit.theta[0].exp(), 5.0, max_relative = 1e-3);
    }

    #[test]
    fn trigamma_matches_digamma_derivative() {
        for &x in &[0.3, 0.62, 1.0, 2.5, 7.0, 30.0] {
            let eps = 1e-6;
            let fd = (digamma(x + eps) - digamma(x - eps)) / (2.0 * eps);
            assert_relative_eq!(trigamma(x), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn lr_test_identical_models_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (design, tau) = sim_gamma(&mut rng, 500, 1.0, &[1.0]);
        let f = fit_design(&design, &tau, ModelKind::Exponential).unwrap();
        let model = LatencyModel {
            kind: ModelKind::Exponential,
            alpha: 1.0,
            theta: f.theta.clone(),
            schema: CovariateSchema::intercept_only(),
            fit_day: None,
            log_likelihood: f.log_likelihood,
            n_obs: 500,
            theta_se: f.theta_se.clone(),
            alpha_se: None,
            converged: true,
            near_degenerate: false,
            gradient_norm: f.gradient_norm,
            iterations: f.iterations,
        };
        let lr = lr_test(&model, &model).unwrap();
        assert_eq!(lr.statistic, 0.0);
        assert_eq!(lr.p_value, 1.0);
    }

    #[test]
    fn lr_size_under_the_exponential_null() {
        // Data generated with alpha = 1: the gamma-vs-exponential LR should
        // reject at roughly its nominal 5% rate.
        let mut rejections = 0;
        let sims = 200;
        for seed in 0..sims {
            let mut rng = ChaCha8Rng::seed_from_u64(40_000 + seed);
            let (design, tau) = sim_gamma(&mut rng, 800, 1.0, &[1.2, -0.2]);
            let e = fit_design(&design, &tau, ModelKind::Exponential).unwrap();
            let g = fit_design(&design, &tau, ModelKind::Gamma).unwrap();
            let stat = (2.0 * (g.log_likelihood - e.log_likelihood)).max(0.0);
            if stat > 3.841 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / sims as f64;
        assert!(rate <= 0.08, "size {rate} too far above the nominal 5%");
        assert!(rate >= 0.01, "size {rate} suspiciously low");
    }

    #[test]
    fn intercept_only_mspe_approaches_the_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (_, tau) = sim_gamma(&mut rng, 20_000, 0.8, &[1.3]);
        let design: Vec<Vec<f64>> = tau.iter().map(|_| vec![1.0]).collect();
        let fit = fit_design(&design, &tau, ModelKind::Gamma).unwrap();
        let mean = tau.iter().sum::<f64>() / tau.len() as f64;
        let var = tau.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / tau.len() as f64;
        let mspe = tau
            .iter()
            .map(|t| {
                let e = fit.alpha * fit.theta[0].exp();
                (t - e) * (t - e)
            })
            .sum::<f64>()
            / tau.len() as f64;
        assert_relative_eq!(mspe, var, max_relative = 0.10);
    }

    #[test]
    fn lr_test_rejects_non_nested() {
        let mk = |kind, schema: CovariateSchema| LatencyModel {
            kind,
            alpha: 1.0,
            theta: vec![0.0; schema.len()],
            schema,
            fit_day: None,
            log_likelihood: 0.0,
            n_obs: 100,
            theta_se: vec![],
            alpha_se: None,
            converged: true,
            near_degenerate: false,
            gradient_norm: 0.0,
            iterations: 0,
        };
        let gamma = mk(ModelKind::Gamma, CovariateSchema::intercept_only());
        let exp_cov = mk(ModelKind::Exponential, CovariateSchema::standard());
        assert!(lr_test(&gamma, &exp_cov).is_err());
    }

    #[test]
    fn predict_moments_closed_form() {
        let model = LatencyModel {
            kind: ModelKind::Gamma,
            alpha: 2.0,
            theta: vec![3.0_f64.ln()],
            schema: CovariateSchema::intercept_only(),
            fit_day: None,
            log_likelihood: 0.0,
            n_obs: 100,
            theta_se: vec![0.0],
            alpha_se: Some(0.0),
            converged: true,
            near_degenerate: false,
            gradient_norm: 0.0,
            iterations: 0,
        };
        let (e, v) = predict_moments(&model, &[1.0]).unwrap();
        assert_relative_eq!(e, 6.0, max_relative = 1e-12);
        assert_relative_eq!(v, 18.0, max_relative = 1e-12);
        // V * alpha == E^2 identically.
        assert_relative_eq!(v * model.alpha, e * e, max_relative = 1e-12);
        assert!(predict_moments(&model, &[1.0, 2.0]).is_err());
    }
}
