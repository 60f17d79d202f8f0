//! Stage implementations.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::bounds::{
    crra_bound, decompose, excess_differences, implied_gamma_market, BoundInputs, Utility, BP,
};
use crate::error::{Error, Result};
use crate::latency::{
    self, io as latency_io, total_latency_moments, BlockTimeStats, LatencyModel, ModelKind,
    TxRecord,
};
use crate::orderbook::{
    difference_matrix, io as book_io, ExchangeProfile, OrderbookSnapshot, PriceDifferenceMatrix,
};
use crate::pipeline::covariates::MinuteCovariates;
use crate::pipeline::manifest::{require_upstream, Manifest};
use crate::pipeline::{atomic_write, PipelineConfig};
use crate::simulator::{
    ce_estimate, laplace_check, moment_check, sample_returns, CeReport, LaplaceCheck, MomentCheck,
    SimConfig,
};
use crate::time::{Day, Minute, MINUTES_PER_DAY};
use crate::volatility::{estimate_day, trim_tails, BidSeries, SpotVolSeries};

// ---------------------------------------------------------------------------
// shared loaders

fn load_books(cfg: &PipelineConfig) -> Result<Vec<OrderbookSnapshot>> {
    let (books, stats) = book_io::read_orderbooks_path(&cfg.inputs.orderbooks, cfg.strict)?;
    if stats.dropped_snapshots > 0 {
        warn!(dropped = stats.dropped_snapshots, "invalid snapshots dropped at ingest");
    }
    Ok(books)
}

fn load_profiles(cfg: &PipelineConfig) -> Result<Vec<ExchangeProfile>> {
    let mut profiles = book_io::read_profiles(&cfg.inputs.profiles)?;
    profiles.sort_by(|a, b| a.exchange_id.cmp(&b.exchange_id));
    Ok(profiles)
}

fn load_transactions(cfg: &PipelineConfig) -> Result<Vec<TxRecord>> {
    let (records, dropped) = latency_io::read_transactions_path(&cfg.inputs.transactions, cfg.strict)?;
    if dropped > 0 {
        warn!(dropped, "invalid transaction rows dropped");
    }
    Ok(records)
}

fn write_csv(out_dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    atomic_write(&out_dir.join(name), &bytes)
}

fn opt_str(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// ingest

pub fn run_ingest(cfg: &PipelineConfig) -> Result<()> {
    let mut manifest = Manifest::new("ingest", &cfg.config_hash(), cfg.seed);
    manifest.record_input(&cfg.inputs.orderbooks)?;
    manifest.record_input(&cfg.inputs.transactions)?;
    manifest.record_input(&cfg.inputs.blocks)?;
    manifest.record_input(&cfg.inputs.profiles)?;

    let books: Vec<OrderbookSnapshot> = load_books(cfg)?
        .into_iter()
        .filter(|s| cfg.in_range(s.timestamp.day()))
        .collect();
    let profiles = load_profiles(cfg)?;
    let transactions = load_transactions(cfg)?;
    let blocks = latency_io::read_blocks_path(&cfg.inputs.blocks, cfg.strict)?;
    info!(
        snapshots = books.len(),
        transactions = transactions.len(),
        blocks = blocks.len(),
        exchanges = profiles.len(),
        "ingest validated inputs"
    );

    let mut buf = Vec::new();
    book_io::write_orderbooks_csv(&books, &mut buf)?;
    atomic_write(&cfg.output_dir.join("orderbooks.csv"), &buf)?;
    manifest.record_output("orderbooks.csv");

    // Per-day, per-exchange coverage of the minute grid.
    let mut coverage: BTreeMap<(Day, String), usize> = BTreeMap::new();
    for snap in &books {
        *coverage.entry((snap.timestamp.day(), snap.exchange_id.clone())).or_default() += 1;
    }
    let rows: Vec<Vec<String>> = coverage
        .into_iter()
        .map(|((day, exchange), present)| {
            vec![
                day.to_iso(),
                exchange,
                present.to_string(),
                MINUTES_PER_DAY.to_string(),
                (present as f64 / MINUTES_PER_DAY as f64).to_string(),
            ]
        })
        .collect();
    write_csv(
        &cfg.output_dir,
        "coverage.csv",
        &["date", "exchange", "minutes_present", "minutes_expected", "coverage"],
        &rows,
    )?;
    manifest.record_output("coverage.csv");
    manifest.write(&cfg.output_dir)
}

// ---------------------------------------------------------------------------
// vol

pub fn run_vol(cfg: &PipelineConfig) -> Result<()> {
    let mut manifest = Manifest::new("vol", &cfg.config_hash(), cfg.seed);
    manifest.record_input(&cfg.inputs.orderbooks)?;
    manifest.record_input(&cfg.inputs.profiles)?;

    let books = load_books(cfg)?;
    let profiles = load_profiles(cfg)?;

    let series: Vec<SpotVolSeries> = profiles
        .par_iter()
        .filter_map(|profile| {
            let bids = match BidSeries::from_snapshots(&profile.exchange_id, &books) {
                Ok(b) => b,
                Err(e) => {
                    warn!(exchange = profile.exchange_id, error = %e, "no usable bid series");
                    return None;
                }
            };
            let mut days: Vec<SpotVolSeries> = Vec::new();
            let first_day = bids.start().day();
            let last_day = Minute(bids.end().0 - 1).day();
            let mut d = first_day;
            while d <= last_day {
                if cfg.in_range(d) {
                    match estimate_day(&bids, d, &cfg.volatility) {
                        Ok(s) if !s.points.is_empty() => days.push(s),
                        Ok(_) => {}
                        Err(e) => warn!(exchange = profile.exchange_id, day = d.to_iso(), error = %e, "skipping day"),
                    }
                }
                d = d.next();
            }
            let mut merged = SpotVolSeries::merge(days)?;
            trim_tails(&mut merged.points, cfg.volatility.trim_fraction);
            Some(merged)
        })
        .collect();

    let mut rows = Vec::new();
    for s in &series {
        let bw: BTreeMap<Day, f64> = s.bandwidths.iter().map(|(d, h, _)| (*d, *h)).collect();
        for p in &s.points {
            rows.push(vec![
                s.exchange_id.clone(),
                p.minute.to_iso(),
                p.sigma.to_string(),
                bw.get(&p.minute.day()).copied().unwrap_or(f64::NAN).to_string(),
                if p.trimmed { "1".into() } else { "0".into() },
            ]);
        }
    }
    write_csv(
        &cfg.output_dir,
        "vol.csv",
        &["exchange", "timestamp", "sigma", "bandwidth", "trimmed"],
        &rows,
    )?;
    manifest.record_output("vol.csv");
    manifest.write(&cfg.output_dir)
}

/// Parse `vol.csv` back into per-(exchange, minute) retained sigmas.
fn read_vol_artifact(out_dir: &Path) -> Result<BTreeMap<(String, Minute), f64>> {
    let path = out_dir.join("vol.csv");
    let mut reader = csv::Reader::from_path(&path)
        .map_err(|_| Error::MissingArtifact(format!("vol.csv ({})", path.display())))?;
    let mut out = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let trimmed = &row[4] == "1";
        if trimmed {
            continue;
        }
        let minute = Minute::parse_iso(&row[1]).ok_or_else(|| Error::Parse {
            context: "vol.csv".into(),
            reason: format!("bad timestamp {:?}", &row[1]),
        })?;
        let sigma: f64 = row[2].parse().map_err(|_| Error::Parse {
            context: "vol.csv".into(),
            reason: format!("bad sigma {:?}", &row[2]),
        })?;
        out.insert((row[0].to_string(), minute), sigma);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// latency

#[derive(Debug, Serialize, Deserialize)]
struct BlockStatsArtifact {
    mean: f64,
    var: f64,
    n_gaps: usize,
    config_hash: String,
    seed: u64,
}

pub fn run_latency(cfg: &PipelineConfig) -> Result<()> {
    let mut manifest = Manifest::new("latency", &cfg.config_hash(), cfg.seed);
    manifest.record_input(&cfg.inputs.transactions)?;
    manifest.record_input(&cfg.inputs.blocks)?;

    let records = load_transactions(cfg)?;
    let blocks = latency_io::read_blocks_path(&cfg.inputs.blocks, cfg.strict)?;
    let block_minutes: Vec<f64> = blocks.iter().map(|b| b.minutes()).collect();
    let stats = BlockTimeStats::from_block_times(&block_minutes)?;
    atomic_write(
        &cfg.output_dir.join("block_stats.json"),
        (serde_json::to_string_pretty(&BlockStatsArtifact {
            mean: stats.mean,
            var: stats.var,
            n_gaps: blocks.len().saturating_sub(1),
            config_hash: cfg.config_hash(),
            seed: cfg.seed,
        })? + "\n")
            .as_bytes(),
    )?;
    manifest.record_output("block_stats.json");

    // Group by confirmation day; models fitted on day D apply on D+1.
    let mut by_day: BTreeMap<Day, Vec<TxRecord>> = BTreeMap::new();
    for rec in records {
        by_day.entry(rec.inclusion_day()).or_default().push(rec);
    }
    let fit_days: Vec<Day> = by_day
        .keys()
        .copied()
        .filter(|d| cfg.in_range(*d) || cfg.in_range(d.next()))
        .collect();

    let models_dir = cfg.output_dir.join("models");
    std::fs::create_dir_all(&models_dir)?;

    let variants = [
        (ModelKind::Exponential, false),
        (ModelKind::Exponential, true),
        (ModelKind::Gamma, false),
        (ModelKind::Gamma, true),
    ];
    let mut summary_rows = Vec::new();
    for day in &fit_days {
        let day_records = &by_day[day];
        if day_records.len() < 50 {
            warn!(day = day.to_iso(), n = day_records.len(), "too few transactions to fit");
            continue;
        }
        let next_records = by_day.get(&day.next());
        let mut fitted: BTreeMap<(ModelKind, bool), LatencyModel> = BTreeMap::new();
        for (kind, with_cov) in variants {
            match latency::fit(day_records, kind, with_cov) {
                Ok(mut model) => {
                    model.fit_day = Some(*day);
                    let name = model_file_name(*day, kind, with_cov);
                    latency_io::write_model(&model, &models_dir.join(&name))?;
                    manifest.record_output(&format!("models/{name}"));
                    fitted.insert((kind, with_cov), model);
                }
                Err(e) => {
                    warn!(day = day.to_iso(), ?kind, with_cov, error = %e, "fit failed");
                }
            }
        }
        for (kind, with_cov) in variants {
            let Some(model) = fitted.get(&(kind, with_cov)) else { continue };
            let lr_cov = if with_cov {
                fitted
                    .get(&(kind, false))
                    .and_then(|restricted| latency::lr_test(restricted, model).ok())
            } else {
                None
            };
            let lr_gamma = if kind == ModelKind::Gamma {
                fitted
                    .get(&(ModelKind::Exponential, with_cov))
                    .and_then(|restricted| latency::lr_test(restricted, model).ok())
            } else {
                None
            };
            let mspe_in = latency::mspe(model, day_records).ok();
            let mspe_out = next_records.and_then(|r| latency::mspe(model, r).ok());
            let fee_idx = model.schema.fee_index();
            let mem_idx = model
                .schema
                .0
                .iter()
                .position(|c| *c == latency::Covariate::LogMempoolSize);
            summary_rows.push(vec![
                day.to_iso(),
                format!("{kind:?}").to_lowercase(),
                if with_cov { "1".into() } else { "0".into() },
                model.alpha.to_string(),
                opt_str(model.alpha_se),
                model.theta[0].to_string(),
                model.theta_se.first().map(|v| v.to_string()).unwrap_or_default(),
                opt_str(fee_idx.map(|i| model.theta[i])),
                opt_str(fee_idx.and_then(|i| model.theta_se.get(i).copied())),
                opt_str(mem_idx.map(|i| model.theta[i])),
                opt_str(mem_idx.and_then(|i| model.theta_se.get(i).copied())),
                model.log_likelihood.to_string(),
                model.n_obs.to_string(),
                if model.converged { "1".into() } else { "0".into() },
                if model.near_degenerate { "1".into() } else { "0".into() },
                opt_str(lr_cov.as_ref().map(|t| t.statistic)),
                opt_str(lr_cov.as_ref().map(|t| t.p_value)),
                opt_str(lr_gamma.as_ref().map(|t| t.statistic)),
                opt_str(lr_gamma.as_ref().map(|t| t.p_value)),
                opt_str(mspe_in),
                opt_str(mspe_out),
            ]);
        }
    }
    write_csv(
        &cfg.output_dir,
        "latency_summary.csv",
        &[
            "date",
            "kind",
            "covariates",
            "alpha",
            "alpha_se",
            "intercept",
            "intercept_se",
            "fee",
            "fee_se",
            "mempool",
            "mempool_se",
            "log_likelihood",
            "n_obs",
            "converged",
            "near_degenerate",
            "lr_vs_nocov_stat",
            "lr_vs_nocov_p",
            "lr_vs_exponential_stat",
            "lr_vs_exponential_p",
            "mspe_in",
            "mspe_out",
        ],
        &summary_rows,
    )?;
    manifest.record_output("latency_summary.csv");
    manifest.write(&cfg.output_dir)
}

fn model_file_name(day: Day, kind: ModelKind, with_cov: bool) -> String {
    format!(
        "{}-{}-{}.json",
        day.to_iso(),
        format!("{kind:?}").to_lowercase(),
        if with_cov { "cov" } else { "nocov" }
    )
}

fn read_block_stats(out_dir: &Path) -> Result<BlockTimeStats> {
    let path = out_dir.join("block_stats.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|_| Error::MissingArtifact(format!("block_stats.json ({})", path.display())))?;
    let artifact: BlockStatsArtifact = serde_json::from_str(&text)?;
    BlockTimeStats::new(artifact.mean, artifact.var)
}

/// Load the fitted model applicable on `day` (fitted on `day - 1`).
fn model_for_day(
    cfg: &PipelineConfig,
    day: Day,
    cache: &mut BTreeMap<Day, Option<LatencyModel>>,
) -> Option<LatencyModel> {
    if let Some(m) = cache.get(&day) {
        return m.clone();
    }
    let load = |d: Day| {
        let name = model_file_name(d, cfg.latency_model, true);
        latency_io::read_model(&cfg.output_dir.join("models").join(name)).ok()
    };
    let mut model = load(day.prev());
    if model.is_none() && cfg.allow_lookahead {
        warn!(day = day.to_iso(), "lookahead override: applying the model fitted on the same day");
        model = load(day);
    }
    if model.is_none() {
        warn!(day = day.to_iso(), "no previous-day latency model; skipping day");
    }
    cache.insert(day, model.clone());
    model
}

// ---------------------------------------------------------------------------
// bounds

struct BoundRow {
    exchange: String,
    gamma: f64,
    d: f64,
    d_one_conf: f64,
    d_deterministic: f64,
}

pub fn run_bounds(cfg: &PipelineConfig) -> Result<()> {
    let hash = cfg.config_hash();
    require_upstream(&cfg.output_dir, "vol", &hash)?;
    require_upstream(&cfg.output_dir, "latency", &hash)?;

    let mut manifest = Manifest::new("bounds", &hash, cfg.seed);
    manifest.record_artifact_input(&cfg.output_dir, "vol.csv")?;
    manifest.record_artifact_input(&cfg.output_dir, "block_stats.json")?;
    manifest.record_input(&cfg.inputs.transactions)?;
    manifest.record_input(&cfg.inputs.profiles)?;

    let vol = read_vol_artifact(&cfg.output_dir)?;
    let blocks = read_block_stats(&cfg.output_dir)?;
    let covariates = MinuteCovariates::build(&load_transactions(cfg)?);
    let profiles: BTreeMap<String, ExchangeProfile> = load_profiles(cfg)?
        .into_iter()
        .map(|p| (p.exchange_id.clone(), p))
        .collect();

    let mut model_cache: BTreeMap<Day, Option<LatencyModel>> = BTreeMap::new();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut detail: Vec<BoundRow> = Vec::new();
    for ((exchange, minute), sigma) in &vol {
        let Some(profile) = profiles.get(exchange) else {
            continue;
        };
        let Some(model) = model_for_day(cfg, minute.day(), &mut model_cache) else {
            continue;
        };
        let fee = covariates.fee_at(*minute);
        let mempool = covariates.mempool_at(*minute);
        let x = model.schema.design_from_raw(fee, mempool);
        let (e_tau, v_tau) = latency::predict_moments(&model, &x)?;
        let confirmations = profile.effective_confirmations();
        let (m1, m2) = total_latency_moments(e_tau, v_tau, &blocks, confirmations)?;
        for &gamma in &cfg.gamma {
            let bound = crra_bound(&BoundInputs::new(*sigma, gamma, m1, m2))?;
            let decomp = decompose(*sigma, gamma, e_tau, v_tau, &blocks, confirmations)?;
            rows.push(vec![
                minute.to_iso(),
                exchange.clone(),
                sigma.to_string(),
                m1.to_string(),
                m2.to_string(),
                gamma.to_string(),
                (bound.d * BP).to_string(),
                opt_str(decomp.map(|d| d.security_share)),
                opt_str(decomp.map(|d| d.uncertainty_share)),
            ]);
            let (sec, unc) = decomp
                .map(|d| (d.security_share, d.uncertainty_share))
                .unwrap_or((0.0, 0.0));
            detail.push(BoundRow {
                exchange: exchange.clone(),
                gamma,
                d: bound.d,
                d_one_conf: bound.d * (1.0 - sec),
                d_deterministic: bound.d * (1.0 - unc),
            });
        }
    }
    // vol artifact iterates exchange-major; bounds.csv is timestamp-major.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| (&rows[a][0], &rows[a][1], &rows[a][5]).cmp(&(&rows[b][0], &rows[b][1], &rows[b][5])));
    let rows: Vec<Vec<String>> = order.into_iter().map(|i| rows[i].clone()).collect();
    write_csv(
        &cfg.output_dir,
        "bounds.csv",
        &[
            "timestamp",
            "sell_exchange",
            "sigma",
            "m1",
            "m2",
            "gamma",
            "bound_bp",
            "security_share",
            "uncertainty_share",
        ],
        &rows,
    )?;
    manifest.record_output("bounds.csv");

    // Table-style per-exchange summary: distribution of the bound plus the
    // decomposition of its median.
    let mut groups: BTreeMap<(String, String), Vec<&BoundRow>> = BTreeMap::new();
    for row in &detail {
        groups.entry((row.exchange.clone(), row.gamma.to_string())).or_default().push(row);
    }
    let mut summary = Vec::new();
    for ((exchange, gamma), group) in groups {
        let mut bp: Vec<f64> = group.iter().map(|r| r.d * BP).collect();
        bp.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = bp.len();
        let mean = bp.iter().sum::<f64>() / n as f64;
        let sd = (bp.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64).sqrt();
        let med = quantile(&bp, 0.5);
        let mut one_conf: Vec<f64> = group.iter().map(|r| r.d_one_conf * BP).collect();
        let mut det: Vec<f64> = group.iter().map(|r| r.d_deterministic * BP).collect();
        one_conf.sort_by(|a, b| a.partial_cmp(b).unwrap());
        det.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let security = if med > 0.0 { 1.0 - quantile(&one_conf, 0.5) / med } else { 0.0 };
        let uncertainty = if med > 0.0 { 1.0 - quantile(&det, 0.5) / med } else { 0.0 };
        summary.push(vec![
            exchange,
            gamma,
            n.to_string(),
            mean.to_string(),
            sd.to_string(),
            quantile(&bp, 0.05).to_string(),
            quantile(&bp, 0.25).to_string(),
            med.to_string(),
            quantile(&bp, 0.75).to_string(),
            quantile(&bp, 0.95).to_string(),
            security.to_string(),
            uncertainty.to_string(),
        ]);
    }
    write_csv(
        &cfg.output_dir,
        "bounds_summary.csv",
        &[
            "sell_exchange",
            "gamma",
            "n",
            "mean_bp",
            "sd_bp",
            "q05_bp",
            "q25_bp",
            "median_bp",
            "q75_bp",
            "q95_bp",
            "security",
            "uncertainty",
        ],
        &summary,
    )?;
    manifest.record_output("bounds_summary.csv");
    manifest.write(&cfg.output_dir)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Per (minute, sell exchange): bound in log-return units, sigma, m1, m2.
type BoundArtifact = BTreeMap<(Minute, String), (f64, f64, f64, f64)>;

fn read_bounds_artifact(out_dir: &Path, gamma: f64) -> Result<BoundArtifact> {
    let path = out_dir.join("bounds.csv");
    let mut reader = csv::Reader::from_path(&path)
        .map_err(|_| Error::MissingArtifact(format!("bounds.csv ({})", path.display())))?;
    let mut out = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let g: f64 = row[5].parse().unwrap_or(f64::NAN);
        if g != gamma {
            continue;
        }
        let minute = Minute::parse_iso(&row[0]).ok_or_else(|| Error::Parse {
            context: "bounds.csv".into(),
            reason: format!("bad timestamp {:?}", &row[0]),
        })?;
        let sigma: f64 = row[2].parse().unwrap_or(f64::NAN);
        let m1: f64 = row[3].parse().unwrap_or(f64::NAN);
        let m2: f64 = row[4].parse().unwrap_or(f64::NAN);
        let bound_bp: f64 = row[6].parse().unwrap_or(f64::NAN);
        out.insert((minute, row[1].to_string()), (bound_bp / BP, sigma, m1, m2));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// excess and implied gamma

fn matrices_by_minute(
    cfg: &PipelineConfig,
    profiles: &[ExchangeProfile],
    books: &[OrderbookSnapshot],
) -> Vec<PriceDifferenceMatrix> {
    let mut by_minute: BTreeMap<Minute, BTreeMap<String, &OrderbookSnapshot>> = BTreeMap::new();
    for snap in books {
        if cfg.in_range(snap.timestamp.day()) {
            by_minute.entry(snap.timestamp).or_default().insert(snap.exchange_id.clone(), snap);
        }
    }
    by_minute
        .par_iter()
        .filter_map(|(minute, snaps)| {
            let aligned: Vec<Option<&OrderbookSnapshot>> =
                profiles.iter().map(|p| snaps.get(&p.exchange_id).copied()).collect();
            if aligned.iter().flatten().count() < 2 {
                return None;
            }
            difference_matrix(profiles, &aligned, *minute, &cfg.grid).ok()
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct ExcessSummary {
    gamma: f64,
    n_positive: usize,
    n_within: usize,
    share_within: Option<f64>,
    config_hash: String,
    seed: u64,
}

pub fn run_excess(cfg: &PipelineConfig) -> Result<()> {
    let hash = cfg.config_hash();
    // Staleness is checked transitively: a mutated raw input invalidates
    // vol/latency, and with them everything downstream.
    require_upstream(&cfg.output_dir, "vol", &hash)?;
    require_upstream(&cfg.output_dir, "latency", &hash)?;
    require_upstream(&cfg.output_dir, "bounds", &hash)?;
    let mut manifest = Manifest::new("excess", &hash, cfg.seed);
    manifest.record_input(&cfg.inputs.orderbooks)?;
    manifest.record_artifact_input(&cfg.output_dir, "bounds.csv")?;

    let gamma = cfg.gamma[0];
    let bounds = read_bounds_artifact(&cfg.output_dir, gamma)?;
    let profiles = load_profiles(cfg)?;
    let books = load_books(cfg)?;
    let matrices = matrices_by_minute(cfg, &profiles, &books);

    let mut rows = Vec::new();
    let mut share_rows = Vec::new();
    let mut total_positive = 0usize;
    let mut total_within = 0usize;
    for matrix in &matrices {
        let per_exchange: Vec<Option<f64>> = matrix
            .exchanges
            .iter()
            .map(|e| bounds.get(&(matrix.timestamp, e.clone())).map(|(d, _, _, _)| *d))
            .collect();
        let excess = excess_differences(matrix, &per_exchange)?;
        let ts = matrix.timestamp.to_iso();
        for (i, j, delta, _q) in matrix.entries() {
            let (Some(bound), Some(ex), Some(over)) = (
                per_exchange[i],
                excess.excess[i * matrix.n() + j],
                excess.exceeds[i * matrix.n() + j],
            ) else {
                continue;
            };
            rows.push(vec![
                ts.clone(),
                matrix.exchanges[j].clone(),
                matrix.exchanges[i].clone(),
                (delta * BP).to_string(),
                (bound * BP).to_string(),
                (ex * BP).to_string(),
                if over { "0".into() } else { "1".into() },
            ]);
        }
        total_positive += excess.n_positive;
        total_within += excess.n_within;
        share_rows.push(vec![
            ts,
            excess.n_positive.to_string(),
            excess.n_within.to_string(),
            opt_str(excess.share_within),
        ]);
    }
    write_csv(
        &cfg.output_dir,
        "excess.csv",
        &["timestamp", "buy", "sell", "delta_bp", "bound_bp", "excess_bp", "within"],
        &rows,
    )?;
    manifest.record_output("excess.csv");
    write_csv(
        &cfg.output_dir,
        "within_share.csv",
        &["timestamp", "n_positive", "n_within", "share_within"],
        &share_rows,
    )?;
    manifest.record_output("within_share.csv");

    let summary = ExcessSummary {
        gamma,
        n_positive: total_positive,
        n_within: total_within,
        share_within: (total_positive > 0).then(|| total_within as f64 / total_positive as f64),
        config_hash: hash.clone(),
        seed: cfg.seed,
    };
    atomic_write(
        &cfg.output_dir.join("excess_summary.json"),
        (serde_json::to_string_pretty(&summary)? + "\n").as_bytes(),
    )?;
    manifest.record_output("excess_summary.json");
    manifest.write(&cfg.output_dir)
}

pub fn run_implied_gamma(cfg: &PipelineConfig) -> Result<()> {
    let hash = cfg.config_hash();
    require_upstream(&cfg.output_dir, "vol", &hash)?;
    require_upstream(&cfg.output_dir, "latency", &hash)?;
    require_upstream(&cfg.output_dir, "bounds", &hash)?;
    let mut manifest = Manifest::new("implied-gamma", &hash, cfg.seed);
    manifest.record_input(&cfg.inputs.orderbooks)?;
    manifest.record_artifact_input(&cfg.output_dir, "bounds.csv")?;

    let inputs = read_bounds_artifact(&cfg.output_dir, cfg.gamma[0])?;
    let profiles = load_profiles(cfg)?;
    let books = load_books(cfg)?;
    let matrices = matrices_by_minute(cfg, &profiles, &books);

    let mut rows = Vec::new();
    let mut daily: BTreeMap<Day, Vec<f64>> = BTreeMap::new();
    for matrix in &matrices {
        let mut entries = Vec::new();
        for (i, _j, delta, _q) in matrix.entries() {
            if delta <= 0.0 {
                continue;
            }
            let Some((_d, sigma, m1, m2)) =
                inputs.get(&(matrix.timestamp, matrix.exchanges[i].clone()))
            else {
                continue;
            };
            entries.push((delta, *sigma, *m1, *m2));
        }
        let Some(gamma_hat) = implied_gamma_market(&entries)? else {
            continue;
        };
        rows.push(vec![
            matrix.timestamp.to_iso(),
            gamma_hat.to_string(),
            entries.len().to_string(),
        ]);
        daily.entry(matrix.timestamp.day()).or_default().push(gamma_hat);
    }
    write_csv(&cfg.output_dir, "implied_gamma.csv", &["timestamp", "gamma_hat", "n_pairs"], &rows)?;
    manifest.record_output("implied_gamma.csv");

    let daily_rows: Vec<Vec<String>> = daily
        .into_iter()
        .map(|(day, mut v)| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            vec![
                day.to_iso(),
                v.last().unwrap().to_string(),
                mean.to_string(),
                v.len().to_string(),
            ]
        })
        .collect();
    write_csv(
        &cfg.output_dir,
        "implied_gamma_daily.csv",
        &["date", "gamma_max", "gamma_mean", "n_minutes"],
        &daily_rows,
    )?;
    manifest.record_output("implied_gamma_daily.csv");
    manifest.write(&cfg.output_dir)
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Serialize)]
pub struct IndifferenceCheck {
    pub delta: f64,
    pub bound: f64,
    pub report: CeReport,
    /// Truncation-convention oracle centred at zero within 3 SEs.
    pub indifferent_ok: bool,
    /// Full-utility CE inside the measured truncation gap plus noise.
    pub full_utility_ok: bool,
}

#[derive(Debug, Serialize)]
pub struct ProfitabilityCheck {
    pub delta: f64,
    pub report: CeReport,
    /// CE positive at (beyond) the 99% level.
    pub profitable_ok: bool,
}

/// Oracle report produced by the `simulate` stage.
#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub seed: u64,
    pub config_hash: String,
    pub settings: crate::pipeline::SimulateSettings,
    pub moments: MomentCheck,
    pub laplace: LaplaceCheck,
    pub laplace_negative_control: LaplaceCheck,
    pub negative_control_rejected: bool,
    pub indifference: IndifferenceCheck,
    pub profitability: ProfitabilityCheck,
    pub all_pass: bool,
}

pub fn run_simulate_report(cfg: &PipelineConfig) -> Result<SimulateReport> {
    let s = &cfg.simulate;
    let exp_law = crate::simulator::LatencyLaw::Exponential { rate: s.exponential_rate };

    // Mixture moments and Laplace limit under exponential latency.
    let exp_config = SimConfig {
        seed: cfg.seed,
        paths: s.paths,
        sigma: s.sigma,
        mu: 0.0,
        delta: 0.002,
        latency: exp_law.clone(),
        step_minutes: 1.0,
    };
    let sample = sample_returns(&exp_config)?;
    let moments = moment_check(&exp_config, &sample);
    let laplace = laplace_check(&sample, exp_config.delta, s.sigma, s.exponential_rate, s.significance);

    // Negative control: gamma latency against the same Laplace reference.
    let control_config = SimConfig {
        latency: crate::simulator::LatencyLaw::Gamma {
            shape: 0.6,
            rate: 0.6 * s.exponential_rate,
        },
        ..exp_config.clone()
    };
    let control_sample = sample_returns(&control_config)?;
    let laplace_negative_control = laplace_check(
        &control_sample,
        control_config.delta,
        s.sigma,
        s.exponential_rate,
        s.significance,
    );

    // Indifference at the CRRA bound under the configured latency law.
    let latency_moments = s.latency.latency_moments();
    let bound = crra_bound(&BoundInputs::new(s.sigma, s.gamma, latency_moments.m1, latency_moments.m2))?.d;
    let utility = Utility::Crra { gamma: s.gamma };
    let at_bound = SimConfig {
        seed: cfg.seed.wrapping_add(1),
        paths: s.paths,
        sigma: s.sigma,
        mu: 0.0,
        delta: bound,
        latency: s.latency.clone(),
        step_minutes: 1.0,
    };
    let report = ce_estimate(&at_bound, &utility)?;
    let indifferent_ok = report.ce_taylor4.abs() <= 3.0 * report.se_taylor4;
    let full_utility_ok =
        report.ce.abs() <= report.truncation_gap + 3.0 * report.se.max(report.se_taylor4);
    let indifference = IndifferenceCheck { delta: bound, bound, report, indifferent_ok, full_utility_ok };

    // Twice the bound must be clearly profitable.
    let above = SimConfig { delta: 2.0 * bound, ..at_bound.clone() };
    let report = ce_estimate(&above, &utility)?;
    let profitable_ok = report.ce > 3.0 * report.se && report.ce_taylor4 > 3.0 * report.se_taylor4;
    let profitability = ProfitabilityCheck { delta: 2.0 * bound, report, profitable_ok };

    let negative_control_rejected = !laplace_negative_control.pass;
    let all_pass = moments.mean_ok
        && moments.variance_ok
        && laplace.pass
        && negative_control_rejected
        && indifference.indifferent_ok
        && indifference.full_utility_ok
        && profitability.profitable_ok;
    Ok(SimulateReport {
        seed: cfg.seed,
        config_hash: cfg.config_hash(),
        settings: s.clone(),
        moments,
        laplace,
        laplace_negative_control,
        negative_control_rejected,
        indifference,
        profitability,
        all_pass,
    })
}

pub fn run_simulate(cfg: &PipelineConfig) -> Result<()> {
    let mut manifest = Manifest::new("simulate", &cfg.config_hash(), cfg.seed);
    let report = run_simulate_report(cfg)?;
    if !report.all_pass {
        warn!("simulation oracle reported failing checks");
    }
    atomic_write(
        &cfg.output_dir.join("simulate_report.json"),
        (serde_json::to_string_pretty(&report)? + "\n").as_bytes(),
    )?;
    manifest.record_output("simulate_report.json");
    manifest.write(&cfg.output_dir)
}
