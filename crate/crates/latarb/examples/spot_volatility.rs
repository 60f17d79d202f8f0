//! Spot volatility from simulated bid quotes.
//!
//! Simulates two days of minute-level Brownian log bids with a volatility
//! jump at noon of day two, selects the bandwidth on day one, estimates
//! day two, and compares to the known truth.
//!
//! ```bash
//! cargo run --release --example spot_volatility
//! ```

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use latarb::time::{Day, Minute, MINUTES_PER_DAY};
use latarb::volatility::{estimate_day, select_bandwidth, trim_tails, BidSeries, VolConfig};

fn main() {
    let sigma_low = 4e-4; // per sqrt-minute
    let sigma_high = 2e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut logp = 45_000.0_f64.ln();
    let obs: Vec<(Minute, f64)> = (0..2 * MINUTES_PER_DAY)
        .map(|i| {
            let of_day = i % MINUTES_PER_DAY;
            let sigma = if i >= MINUTES_PER_DAY && of_day >= 720 { sigma_high } else { sigma_low };
            logp += Normal::new(0.0, sigma).unwrap().sample(&mut rng);
            (Minute(i), logp.exp())
        })
        .collect();
    let series = BidSeries::from_observations("EXA", &obs).unwrap();

    let cfg = VolConfig::default();
    let choice = select_bandwidth(&series, Day(1), &cfg);
    println!("bandwidth selection on the previous day (ISE criterion):");
    for (h, ise) in &choice.ise_curve {
        let marker = if *h == choice.bandwidth { " <- selected" } else { "" };
        println!("  h = {h:>5.0} min   ISE = {ise:.3e}{marker}");
    }

    let mut day = estimate_day(&series, Day(1), &cfg).unwrap();
    trim_tails(&mut day.points, cfg.trim_fraction);

    let (mut am, mut am_n, mut pm, mut pm_n) = (0.0, 0, 0.0, 0);
    for p in day.points.iter().filter(|p| !p.trimmed) {
        if p.minute.minute_of_day() < 720 {
            am += p.sigma;
            am_n += 1;
        } else {
            pm += p.sigma;
            pm_n += 1;
        }
    }
    println!();
    println!("day-two estimates with h = {}:", day.bandwidths[0].1);
    println!(
        "  morning mean sigma  {:.2e} per sqrt-min (truth {sigma_low:.2e})",
        am / am_n as f64
    );
    println!(
        "  afternoon mean sigma {:.2e} per sqrt-min (truth {sigma_high:.2e})",
        pm / pm_n as f64
    );
    println!(
        "  daily scale: {:.2}% (mean sigma x sqrt(1440))",
        (am + pm) / (am_n + pm_n) as f64 * (MINUTES_PER_DAY as f64).sqrt() * 100.0
    );
    println!(
        "  {} of {} estimates trimmed at the {}% tails",
        day.points.iter().filter(|p| p.trimmed).count(),
        day.points.len(),
        cfg.trim_fraction * 100.0
    );
}
