//! End-to-end golden-run machinery shared by the integration tests.
//!
//! Runs the whole pipeline twice on the bundled synthetic fixture and
//! recomputes the share-within-bounds statistic with a from-scratch
//! implementation of ladder walking and grid search (no calls into the
//! library's orderbook code), so the pipeline value is checked against
//! genuinely independent arithmetic.
//!
//! Setting `LATARB_BLESS_GOLDEN=1` rewrites `tests/golden/bounds.csv` from
//! the current run; tests then compare against the committed file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use latarb::fixture;
use latarb::pipeline::{self, PipelineConfig, Stage};

pub struct GoldenOutcome {
    pub byte_identical: bool,
    pub bounds_csv: Vec<u8>,
    pub golden_bounds_csv: Vec<u8>,
    pub pipeline_positive: usize,
    pub pipeline_within: usize,
    pub independent_positive: usize,
    pub independent_within: usize,
}

pub fn golden_run() -> GoldenOutcome {
    let work = tempfile::tempdir().unwrap();
    let fixture_dir = work.path().join("fixtures");
    let data = fixture::generate(42);
    let paths = fixture::write_to_dir(&data, &fixture_dir).unwrap();

    let base_config = |out: PathBuf| PipelineConfig {
        inputs: pipeline::Inputs {
            orderbooks: paths.orderbooks.clone(),
            transactions: paths.transactions.clone(),
            blocks: paths.blocks.clone(),
            profiles: paths.profiles.clone(),
        },
        from: Some(fixture::FIXTURE_START.to_string()),
        to: Some("2021-03-02".to_string()),
        gamma: vec![2.0],
        latency_model: latarb::latency::ModelKind::Gamma,
        seed: 42,
        jobs: 0,
        strict: false,
        allow_lookahead: false,
        volatility: Default::default(),
        grid: Default::default(),
        simulate: latarb::pipeline::SimulateSettings {
            paths: 200_000,
            ..Default::default()
        },
        output_dir: out,
    };

    let stages = [
        Stage::Ingest,
        Stage::Vol,
        Stage::Latency,
        Stage::Bounds,
        Stage::Excess,
        Stage::ImpliedGamma,
        Stage::Simulate,
    ];
    let out1 = work.path().join("out1");
    let cfg1 = base_config(out1.clone());
    for stage in stages {
        pipeline::run(stage, &cfg1).unwrap_or_else(|e| panic!("{} failed: {e}", stage.name()));
    }
    let out2 = work.path().join("out2");
    let cfg2 = base_config(out2.clone());
    for stage in stages {
        pipeline::run(stage, &cfg2).unwrap_or_else(|e| panic!("{} failed: {e}", stage.name()));
    }

    let byte_identical = dirs_equal(&out1, &out2);

    let bounds_csv = std::fs::read(out1.join("bounds.csv")).unwrap();
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/bounds.csv");
    if std::env::var("LATARB_BLESS_GOLDEN").is_ok() {
        std::fs::create_dir_all(golden_path.parent().unwrap()).unwrap();
        std::fs::write(&golden_path, &bounds_csv).unwrap();
    }
    let golden_bounds_csv = std::fs::read(&golden_path).unwrap_or_default();

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("excess_summary.json")).unwrap())
            .unwrap();
    let pipeline_positive = summary["n_positive"].as_u64().unwrap() as usize;
    let pipeline_within = summary["n_within"].as_u64().unwrap() as usize;

    let (independent_positive, independent_within) =
        independent_share(&paths.orderbooks, &out1.join("bounds.csv"));

    GoldenOutcome {
        byte_identical,
        bounds_csv,
        golden_bounds_csv,
        pipeline_positive,
        pipeline_within,
        independent_positive,
        independent_within,
    }
}

fn dirs_equal(a: &Path, b: &Path) -> bool {
    let list = |root: &Path| -> Vec<PathBuf> {
        let mut files = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    files.push(path.strip_prefix(root).unwrap().to_path_buf());
                }
            }
        }
        files.sort();
        files
    };
    let fa = list(a);
    let fb = list(b);
    if fa != fb {
        eprintln!("file sets differ: {fa:?} vs {fb:?}");
        return false;
    }
    for rel in fa {
        let ba = std::fs::read(a.join(&rel)).unwrap();
        let bb = std::fs::read(b.join(&rel)).unwrap();
        if ba != bb {
            eprintln!("artifact differs between runs: {}", rel.display());
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Independent share-within-bounds computation. Plain string parsing, local
// ladder walking, and a re-derivation of the documented quantity grid
// (geometric with 200 points from the minimum level size to the common
// depth, plus cumulative-depth breakpoints).

struct RawBook {
    bids: Vec<(f64, f64)>,
    asks: Vec<(f64, f64)>,
}

/// Fixture exchange fee schedule, mirrored from `fixture::profiles()`:
/// (id, taker fee, withdrawal fee).
const FIXTURE_FEES: [(&str, f64, f64); 3] =
    [("EXA", 0.001, 0.0005), ("EXB", 0.002, 0.0), ("EXC", 0.0015, 0.001)];

fn independent_share(orderbooks_csv: &Path, bounds_csv: &Path) -> (usize, usize) {
    // Bounds per (timestamp, sell exchange), in log-return units.
    let mut bounds: BTreeMap<(String, String), f64> = BTreeMap::new();
    let bounds_text = std::fs::read_to_string(bounds_csv).unwrap();
    for line in bounds_text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let bound_bp: f64 = f[6].parse().unwrap();
        bounds.insert((f[0].to_string(), f[1].to_string()), bound_bp / 1e4);
    }

    // Books per (timestamp, exchange).
    let mut books: BTreeMap<(String, String), RawBook> = BTreeMap::new();
    let text = std::fs::read_to_string(orderbooks_csv).unwrap();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let key = (f[1].to_string(), f[0].to_string());
        let book = books.entry(key).or_insert(RawBook { bids: Vec::new(), asks: Vec::new() });
        let level = (f[4].parse::<f64>().unwrap(), f[5].parse::<f64>().unwrap());
        match f[2] {
            "bid" => book.bids.push(level),
            _ => book.asks.push(level),
        }
    }

    let mut by_minute: BTreeMap<String, Vec<(&str, &RawBook)>> = BTreeMap::new();
    for ((ts, ex), book) in &books {
        by_minute.entry(ts.clone()).or_default().push((ex.as_str(), book));
    }

    let mut positive = 0usize;
    let mut within = 0usize;
    for (ts, present) in &by_minute {
        if present.len() < 2 {
            continue;
        }
        for (sell_ex, sell_book) in present {
            let Some(bound) = bounds.get(&(ts.clone(), sell_ex.to_string())) else {
                continue;
            };
            let (_, sell_taker, _) = FIXTURE_FEES.iter().find(|(id, ..)| id == sell_ex).unwrap();
            for (buy_ex, buy_book) in present {
                if buy_ex == sell_ex {
                    continue;
                }
                let (_, buy_taker, buy_wd) =
                    FIXTURE_FEES.iter().find(|(id, ..)| id == buy_ex).unwrap();
                let delta =
                    best_delta(buy_book, sell_book, *buy_taker, *sell_taker, *buy_wd);
                if delta > 0.0 {
                    positive += 1;
                    if delta <= *bound {
                        within += 1;
                    }
                }
            }
        }
    }
    (positive, within)
}

fn vwap(levels: &[(f64, f64)], quantity: f64) -> f64 {
    let mut remaining = quantity;
    let mut notional = 0.0;
    for &(price, qty) in levels {
        let take = remaining.min(qty);
        notional += take * price;
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }
    notional / quantity
}

/// Return-maximizing price difference, floored at zero, with the
/// withdrawal-fee threshold applied.
fn best_delta(buy: &RawBook, sell: &RawBook, buy_taker: f64, sell_taker: f64, buy_wd: f64) -> f64 {
    let bid_depth: f64 = sell.bids.iter().map(|l| l.1).sum();
    let ask_depth: f64 = buy.asks.iter().map(|l| l.1).sum();
    let q_max = bid_depth.min(ask_depth);
    if q_max <= 0.0 {
        return 0.0;
    }
    let min_level = sell
        .bids
        .iter()
        .chain(buy.asks.iter())
        .map(|l| l.1)
        .fold(f64::INFINITY, f64::min);
    let lo = min_level.clamp(q_max * 1e-6, q_max);
    let n = 200;
    let ratio = q_max / lo;
    let mut grid: Vec<f64> = (0..n)
        .map(|i| lo * ratio.powf(i as f64 / (n - 1) as f64))
        .collect();
    let mut acc = 0.0;
    for l in &sell.bids {
        acc += l.1;
        if acc < q_max {
            grid.push(acc);
        }
    }
    acc = 0.0;
    for l in &buy.asks {
        acc += l.1;
        if acc < q_max {
            grid.push(acc);
        }
    }
    grid.push(q_max);
    grid.retain(|q| *q > 0.0 && *q <= q_max);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());

    let mut best_ret = 0.0;
    let mut best_q = 0.0;
    let mut best_delta = 0.0;
    for &q in &grid {
        let s = vwap(&sell.bids, q) * (1.0 - sell_taker);
        let b = vwap(&buy.asks, q) * (1.0 + buy_taker);
        let ret = s * q - b * q;
        if ret > best_ret {
            best_ret = ret;
            best_q = q;
            best_delta = s.ln() - b.ln();
        }
    }
    if best_q <= buy_wd {
        return 0.0;
    }
    best_delta.max(0.0)
}
