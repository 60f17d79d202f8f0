//! Implied relative risk aversion.
//!
//! Inverts the bound relation: given an observed net price difference, what
//! risk aversion would make an arbitrageur exactly indifferent? Differences
//! below the bound of a gamma=2 trader imply small gammas; any trader with
//! risk aversion below the implied value would trade.
//!
//! ```bash
//! cargo run --release --example implied_risk_aversion
//! ```

use latarb::bounds::{crra_bound, implied_gamma, implied_gamma_market, BoundInputs};

fn main() {
    let sigma = 0.0009;
    let (c1, c2) = (29.4, 1340.72); // total-latency moments at B = 3

    println!("round trip: bound at gamma, then implied gamma from the bound");
    println!("{:>8} {:>12} {:>14}", "gamma", "bound bp", "implied gamma");
    for gamma in [1.5, 2.0, 5.0, 10.0, 17.0] {
        let d = crra_bound(&BoundInputs::new(sigma, gamma, c1, c2)).unwrap();
        let implied = implied_gamma(d.d, sigma, c1, c2).unwrap();
        println!("{gamma:>8.1} {:>12.2} {implied:>14.6}", d.bp);
    }

    println!();
    println!("observed differences and the risk aversion they imply:");
    println!("{:>12} {:>14}", "delta bp", "implied gamma");
    for bp in [1.0, 10.0, 50.0, 80.0, 150.0, 400.0] {
        let implied = implied_gamma(bp / 1e4, sigma, c1, c2).unwrap();
        println!("{bp:>12.1} {implied:>14.4}");
    }

    // Market level: the smallest gamma reconciling every pair is the max.
    let pairs = [
        (30.0, 0.0009, 29.4, 1340.7),
        (95.0, 0.0011, 22.0, 900.0),
        (55.0, 0.0008, 40.0, 2300.0),
    ];
    let entries: Vec<(f64, f64, f64, f64)> =
        pairs.iter().map(|&(bp, s, a, b)| (bp / 1e4, s, a, b)).collect();
    let market = implied_gamma_market(&entries).unwrap().unwrap();
    println!();
    println!("three exchange pairs:");
    for (bp, s, a, b) in pairs {
        let g = implied_gamma(bp / 1e4, s, a, b).unwrap();
        println!("  delta {bp:>5.1} bp, sigma {s}, (c1, c2) = ({a}, {b})  -> gamma {g:.3}");
    }
    println!("market-level implied gamma (max over pairs): {market:.3}");
}
