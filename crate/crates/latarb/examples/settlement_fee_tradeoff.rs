//! The settlement-fee trade-off.
//!
//! A higher fee per byte shortens expected confirmation time, which lowers
//! the arbitrage bound; but the fee is paid in the asset and raises the
//! buy-side cost. This example sweeps the bound response d(f) from a fitted
//! duration model and then jointly optimizes quantity and fee against an
//! endogenous bound on synthetic books.
//!
//! ```bash
//! cargo run --release --example settlement_fee_tradeoff
//! ```

use latarb::bounds::bound_fee_response;
use latarb::latency::{BlockTimeStats, CovariateSchema, LatencyModel, ModelKind};
use latarb::orderbook::{
    optimal_quantity_fee, ExchangeProfile, GridConfig, Level, OrderbookSnapshot,
};
use latarb::time::Minute;

fn main() {
    // A fitted-style gamma model: negative fee coefficient, positive
    // mempool coefficient.
    let model = LatencyModel {
        kind: ModelKind::Gamma,
        alpha: 0.62,
        theta: vec![1.19, -0.22, 0.31],
        schema: CovariateSchema::standard(),
        fit_day: None,
        log_likelihood: 0.0,
        n_obs: 10_000,
        theta_se: vec![0.0; 3],
        alpha_se: Some(0.0),
        converged: true,
        near_degenerate: false,
        gradient_norm: 0.0,
        iterations: 0,
    };
    let blocks = BlockTimeStats::new(9.7, 94.09).unwrap();
    let x = model.schema.design_from_raw(14.0, 4500.0); // median-ish covariates
    let grid: Vec<f64> = vec![0.0, 1.0, 5.0, 14.0, 45.0, 200.0, 1000.0];

    println!("bound response to the settlement fee (sigma 9 bp/sqrt-min, gamma 2, B 3):");
    println!("{:>12} {:>12}", "fee sat/B", "bound bp");
    let curve = bound_fee_response(&model, &x, &grid, 0.0009, 2.0, &blocks, 3).unwrap();
    for (fee, d) in &curve {
        println!("{fee:>12.0} {:>12.2}", d * 1e4);
    }

    // Joint optimization on books where depth is only reachable by paying.
    let book = |ex: &str, bids: Vec<Level>, asks: Vec<Level>| {
        OrderbookSnapshot::new(ex, Minute(0), bids, asks).unwrap()
    };
    let lvl = |price: f64, quantity: f64| Level { price, quantity };
    let buy = book(
        "CHEAP",
        vec![lvl(99.0, 5.0)],
        vec![lvl(100.0, 4.0), lvl(100.6, 6.0)],
    );
    let sell = book(
        "RICH",
        vec![lvl(101.5, 4.0), lvl(100.9, 6.0)],
        vec![lvl(102.5, 5.0)],
    );
    let zero_fees = |id: &str| ExchangeProfile {
        exchange_id: id.into(),
        taker_fee: 0.0,
        withdrawal_fee: None,
        confirmations: None,
        margin: false,
        business: false,
    };
    let cfg = GridConfig { fee_points: 40, max_fee_fraction: 0.005, ..GridConfig::default() };
    let delta_best = (101.5_f64 / 100.0).ln();

    println!();
    println!("joint (quantity, fee) choice against d(f) = d0 exp(-kappa f):");
    println!("{:>8} {:>8} {:>10} {:>8} {:>12}", "d0 bp", "kappa", "q*", "f*", "return");
    for (d0_frac, kappa) in [(0.9, 0.0), (0.9, 50.0), (0.9, 400.0), (0.5, 400.0)] {
        let d0 = d0_frac * delta_best;
        let bound = move |f: f64| d0 * (-kappa * f).exp();
        let choice = optimal_quantity_fee(
            &buy,
            &sell,
            &zero_fees("CHEAP"),
            &zero_fees("RICH"),
            &bound,
            &cfg,
        )
        .unwrap();
        println!(
            "{:>8.1} {kappa:>8.0} {:>10.4} {:>8.4} {:>12.3}",
            d0 * 1e4,
            choice.quantity,
            choice.fee,
            choice.total_return
        );
    }
    println!();
    println!("a flat bound (kappa 0) never justifies a fee; a steep one unlocks");
    println!("the second ladder level for less than the extra margin it earns.");
}
