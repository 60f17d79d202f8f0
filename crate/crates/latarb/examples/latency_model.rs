//! Duration models for settlement latency.
//!
//! Simulates confirmation times from a gamma regression on fee and mempool
//! covariates, fits all four model variants by maximum likelihood, and
//! reports parameters, likelihood-ratio tests, and prediction errors.
//!
//! ```bash
//! cargo run --release --example latency_model
//! ```

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma as GammaDist, Normal};

use latarb::latency::{fit_design, lr_test, total_latency_moments, BlockTimeStats, DurationFit, ModelKind};

fn simulate(
    rng: &mut ChaCha8Rng,
    n: usize,
    alpha: f64,
    theta: &[f64],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut design = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    for _ in 0..n {
        let x = vec![1.0, normal.sample(rng), normal.sample(rng)];
        let xb: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
        tau.push(GammaDist::new(alpha, xb.exp()).unwrap().sample(rng));
        design.push(x);
    }
    (design, tau)
}

fn mspe(fit: &DurationFit, design: &[Vec<f64>], tau: &[f64]) -> f64 {
    design
        .iter()
        .zip(tau)
        .map(|(x, t)| {
            let xb: f64 = x.iter().zip(&fit.theta).map(|(a, b)| a * b).sum();
            let e = fit.alpha * xb.exp();
            (t - e) * (t - e)
        })
        .sum::<f64>()
        / tau.len() as f64
}

fn main() {
    let truth_alpha = 0.62;
    let truth_theta = [1.19, -0.22, 0.31];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (design, tau) = simulate(&mut rng, 10_000, truth_alpha, &truth_theta);
    let (design_oos, tau_oos) = simulate(&mut rng, 2_000, truth_alpha, &truth_theta);
    let intercept_only: Vec<Vec<f64>> = design.iter().map(|_| vec![1.0]).collect();

    println!("generating truth: alpha {truth_alpha}, theta {truth_theta:?}, n = 10000");
    println!();
    println!(
        "{:<26} {:>8} {:>9} {:>9} {:>9} {:>11} {:>9} {:>9}",
        "model", "alpha", "intercept", "fee", "mempool", "loglik", "mspe in", "mspe out"
    );

    let mut fits = Vec::new();
    for (kind, with_cov) in [
        (ModelKind::Exponential, false),
        (ModelKind::Exponential, true),
        (ModelKind::Gamma, false),
        (ModelKind::Gamma, true),
    ] {
        let x = if with_cov { &design } else { &intercept_only };
        let fit = fit_design(x, &tau, kind).unwrap();
        let x_oos: Vec<Vec<f64>> = if with_cov {
            design_oos.clone()
        } else {
            design_oos.iter().map(|_| vec![1.0]).collect()
        };
        println!(
            "{:<26} {:>8.3} {:>9.3} {:>9} {:>9} {:>11.1} {:>9.2} {:>9.2}",
            format!("{kind:?} {}", if with_cov { "w/ covariates" } else { "w/o covariates" }),
            fit.alpha,
            fit.theta[0],
            fit.theta.get(1).map(|v| format!("{v:.3}")).unwrap_or_default(),
            fit.theta.get(2).map(|v| format!("{v:.3}")).unwrap_or_default(),
            fit.log_likelihood,
            mspe(&fit, x, &tau),
            mspe(&fit, &x_oos, &tau_oos),
        );
        fits.push((kind, with_cov, fit));
    }

    let to_model = |fit: &DurationFit, with_cov: bool| latarb::latency::LatencyModel {
        kind: fit.kind,
        alpha: fit.alpha,
        theta: fit.theta.clone(),
        schema: if with_cov {
            latarb::latency::CovariateSchema::standard()
        } else {
            latarb::latency::CovariateSchema::intercept_only()
        },
        fit_day: None,
        log_likelihood: fit.log_likelihood,
        n_obs: tau.len(),
        theta_se: fit.theta_se.clone(),
        alpha_se: fit.alpha_se,
        converged: fit.converged,
        near_degenerate: fit.near_degenerate,
        gradient_norm: fit.gradient_norm,
        iterations: fit.iterations,
    };
    let gamma_nocov = to_model(&fits[2].2, false);
    let gamma_cov = to_model(&fits[3].2, true);
    let exp_cov = to_model(&fits[1].2, true);

    println!();
    let lr = lr_test(&gamma_nocov, &gamma_cov).unwrap();
    println!("LR covariates (gamma):     stat {:.1}, dof {}, p {:.2e}", lr.statistic, lr.dof, lr.p_value);
    let lr = lr_test(&exp_cov, &gamma_cov).unwrap();
    println!("LR gamma vs exponential:   stat {:.1}, dof {}, p {:.2e}", lr.statistic, lr.dof, lr.p_value);

    // Conditional moments at average covariates, compounded over block
    // confirmations.
    let x_bar = vec![1.0, 0.0, 0.0];
    let (e_tau, v_tau) = latarb::latency::predict_moments(&gamma_cov, &x_bar).unwrap();
    let blocks = BlockTimeStats::new(9.7, 94.09).unwrap();
    println!();
    println!("conditional moments at mean covariates: E(tau) {e_tau:.2} min, V(tau) {v_tau:.2} min^2");
    for b in [1u32, 3, 6] {
        let (m1, m2) = total_latency_moments(e_tau, v_tau, &blocks, b).unwrap();
        println!("  B = {b}: m1 = {m1:>6.2} min, m2 = {m2:>9.1} min^2");
    }
}
