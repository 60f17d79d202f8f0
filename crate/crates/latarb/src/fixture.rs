//! Bundled synthetic market data.
//!
//! Deterministic 3-exchange, 2-day dataset used by the integration tests,
//! the examples, and the end-to-end golden run: minute orderbooks around a
//! common random walk with exchange-specific premia, transactions whose
//! confirmation times follow the gamma duration model, and blocks with
//! exponential inter-arrival times.

use chrono::{Duration as ChronoDuration, TimeZone, Utc};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma as GammaDist, LogNormal, Normal};

use crate::error::Result;
use crate::latency::{BlockRecord, TxRecord};
use crate::orderbook::{io as book_io, ExchangeProfile, Level, OrderbookSnapshot};
use crate::time::{Day, Minute, MINUTES_PER_DAY};

/// First day of the synthetic sample.
pub const FIXTURE_START: &str = "2021-03-01";
pub const FIXTURE_DAYS: i64 = 2;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub orderbooks: Vec<OrderbookSnapshot>,
    pub transactions: Vec<TxRecord>,
    pub blocks: Vec<BlockRecord>,
    pub profiles: Vec<ExchangeProfile>,
}

/// File names produced by [`write_to_dir`].
#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub orderbooks: std::path::PathBuf,
    pub transactions: std::path::PathBuf,
    pub blocks: std::path::PathBuf,
    pub profiles: std::path::PathBuf,
}

pub fn profiles() -> Vec<ExchangeProfile> {
    vec![
        ExchangeProfile {
            exchange_id: "EXA".into(),
            taker_fee: 0.001,
            withdrawal_fee: Some(0.0005),
            confirmations: Some(2),
            margin: true,
            business: true,
        },
        ExchangeProfile {
            exchange_id: "EXB".into(),
            taker_fee: 0.002,
            withdrawal_fee: None,
            confirmations: None,
            margin: false,
            business: true,
        },
        ExchangeProfile {
            exchange_id: "EXC".into(),
            taker_fee: 0.0015,
            withdrawal_fee: Some(0.001),
            confirmations: Some(1),
            margin: true,
            business: false,
        },
    ]
}

/// Generate the full dataset. Identical seeds give identical data.
pub fn generate(seed: u64) -> Fixture {
    let start_day = Day::parse_iso(FIXTURE_START).unwrap();
    let start_minute = start_day.first_minute();
    let total_minutes = FIXTURE_DAYS * MINUTES_PER_DAY;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, 9e-4).unwrap();

    // Half-spreads in fractions; EXB quotes a slowly oscillating premium so
    // the sample contains no-trade minutes, differences inside the bounds,
    // and occasional genuine excesses.
    let half_spread = [6e-4, 9e-4, 7e-4];
    let names = ["EXA", "EXB", "EXC"];

    let mut orderbooks = Vec::new();
    let mut log_mid = 45_000.0_f64.ln();
    for i in 0..total_minutes {
        log_mid += step.sample(&mut rng);
        let minute = Minute(start_minute.0 + i);
        let cycle = (i as f64 / 720.0 * std::f64::consts::TAU).sin();
        let premium = [0.0, 8.0e-3 + 7.0e-3 * cycle, -1.0e-3 + 2.0e-3 * cycle];
        for e in 0..3 {
            // Sparse outages exercise the missing-data paths.
            if rng.random::<f64>() < 0.01 {
                continue;
            }
            let mid = (log_mid + premium[e] + rng.random_range(-2e-4..2e-4)).exp();
            let mut bids = Vec::new();
            let mut asks = Vec::new();
            for lvl in 0..3 {
                let widen = half_spread[e] * (1.0 + 0.9 * lvl as f64);
                let bid_px = round2(mid * (1.0 - widen));
                let ask_px = round2(mid * (1.0 + widen));
                let bid_qty = round4(rng.random_range(0.6..3.0));
                let ask_qty = round4(rng.random_range(0.6..3.0));
                bids.push(Level { price: bid_px, quantity: bid_qty });
                asks.push(Level { price: ask_px, quantity: ask_qty });
            }
            // Price rounding can merge adjacent levels; nudge them apart.
            for lvl in 1..3 {
                if bids[lvl].price >= bids[lvl - 1].price {
                    bids[lvl].price = round2(bids[lvl - 1].price - 0.01);
                }
                if asks[lvl].price <= asks[lvl - 1].price {
                    asks[lvl].price = round2(asks[lvl - 1].price + 0.01);
                }
            }
            orderbooks
                .push(OrderbookSnapshot::new(names[e], minute, bids, asks).expect("fixture book is valid"));
        }
    }

    // Transactions: gamma duration model with the usual covariates.
    let theta = [1.19, -0.22, 0.31];
    let alpha = 0.62;
    let fee_law = LogNormal::new(2.6, 1.0).unwrap();
    let mempool_law = LogNormal::new(8.4, 0.6).unwrap();
    let size_law = LogNormal::new(5.6, 0.5).unwrap();
    let n_tx = 2600;
    let mut transactions = Vec::with_capacity(n_tx);
    let start_ts = Utc
        .timestamp_opt(start_minute.0 * 60, 0)
        .unwrap();
    for k in 0..n_tx {
        let announce_offset = rng.random_range(0..total_minutes * 60);
        let announce = start_ts + ChronoDuration::seconds(announce_offset);
        let fee: f64 = fee_law.sample(&mut rng);
        let fee = (fee.clamp(1.0, 500.0) * 100.0).round() / 100.0;
        let mempool: f64 = mempool_law.sample(&mut rng);
        let mempool = mempool.clamp(400.0, 42_000.0).round();
        let x_theta =
            theta[0] + theta[1] * fee.ln_1p() + theta[2] * mempool.ln();
        let rate: f64 = (-x_theta).exp();
        let tau_min: f64 = GammaDist::new(alpha, 1.0 / rate).unwrap().sample(&mut rng);
        let tau_min = tau_min.max(0.05);
        let inclusion = announce + ChronoDuration::milliseconds((tau_min * 60_000.0) as i64);
        let size: f64 = size_law.sample(&mut rng);
        transactions.push(TxRecord {
            tx_id: format!("tx{k:05}"),
            announce_time: announce,
            first_inclusion_time: inclusion,
            fee_per_byte: fee,
            size: size.clamp(180.0, 8000.0).round() as u64,
            mempool_size: mempool as u64,
        });
    }
    transactions.sort_by_key(|t| t.announce_time);

    // Blocks: i.i.d. exponential gaps, mean 9.7 minutes.
    let gap = Exp::new(1.0 / 9.7).unwrap();
    let mut blocks = Vec::new();
    let mut t = 0.0_f64;
    let mut height = 700_000u64;
    while t < (total_minutes * 60) as f64 {
        blocks.push(BlockRecord {
            height,
            timestamp: start_ts + ChronoDuration::seconds(t as i64),
        });
        height += 1;
        t += gap.sample(&mut rng) * 60.0;
    }

    Fixture { orderbooks, transactions, blocks, profiles: profiles() }
}

/// Write the dataset as the pipeline input files.
pub fn write_to_dir(fixture: &Fixture, dir: &std::path::Path) -> Result<FixturePaths> {
    std::fs::create_dir_all(dir)?;
    let paths = FixturePaths {
        orderbooks: dir.join("orderbooks.csv"),
        transactions: dir.join("transactions.csv"),
        blocks: dir.join("blocks.csv"),
        profiles: dir.join("profiles.json"),
    };

    let mut buf = Vec::new();
    book_io::write_orderbooks_csv(&fixture.orderbooks, &mut buf)?;
    std::fs::write(&paths.orderbooks, buf)?;

    let mut w = csv::Writer::from_path(&paths.transactions)?;
    w.write_record(["tx_id", "announce_time", "inclusion_time", "fee_per_byte", "size", "mempool_size"])?;
    for tx in &fixture.transactions {
        w.write_record([
            tx.tx_id.as_str(),
            &tx.announce_time.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            &tx.first_inclusion_time.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            &tx.fee_per_byte.to_string(),
            &tx.size.to_string(),
            &tx.mempool_size.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(&paths.blocks)?;
    w.write_record(["height", "timestamp"])?;
    for b in &fixture.blocks {
        w.write_record([
            b.height.to_string(),
            b.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        ])?;
    }
    w.flush()?;

    book_io::write_profiles_json(&fixture.profiles, &paths.profiles)?;
    Ok(paths)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = generate(42);
        let b = generate(42);
        assert_eq!(a.orderbooks.len(), b.orderbooks.len());
        assert_eq!(a.orderbooks, b.orderbooks);
        assert_eq!(a.transactions.len(), b.transactions.len());
        assert_eq!(a.blocks.len(), b.blocks.len());
        let c = generate(43);
        assert_ne!(a.orderbooks, c.orderbooks);
    }

    #[test]
    fn fixture_has_two_full_days_of_books() {
        let f = generate(42);
        let start = Day::parse_iso(FIXTURE_START).unwrap();
        assert!(f.orderbooks.iter().all(|s| {
            let d = s.timestamp.day();
            d == start || d == start.next()
        }));
        // ~1% outages on 3 * 2880 exchange-minutes.
        assert!(f.orderbooks.len() > 8400 && f.orderbooks.len() < 8640);
        assert!(f.transactions.len() >= 2000);
        assert!(f.blocks.len() > 200);
    }

    #[test]
    fn transaction_latencies_are_plausible_minutes() {
        let f = generate(42);
        let lat: Vec<f64> = f.transactions.iter().map(|t| t.latency_minutes()).collect();
        assert!(lat.iter().all(|l| *l > 0.0));
        let mean = lat.iter().sum::<f64>() / lat.len() as f64;
        assert!(mean > 5.0 && mean < 120.0, "mean latency {mean}");
    }
}
