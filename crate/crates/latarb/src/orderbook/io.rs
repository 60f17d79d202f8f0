//! Orderbook and exchange-profile file formats.
//!
//! CSV: `exchange,timestamp,side,level,price,quantity` with UTC ISO-8601
//! timestamps, one row per level. JSON-lines: one snapshot object per line,
//! `{"exchange", "timestamp", "bids": [[price, qty], ...], "asks": [...]}`.
//! Profiles: a JSON or TOML document with one entry per exchange mirroring
//! the exchange characteristics table (taker fee, withdrawal fee,
//! confirmations, margin/business flags).

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::orderbook::{ExchangeProfile, Level, OrderbookSnapshot};
use crate::time::{parse_timestamp, Minute};

#[derive(Debug, Deserialize)]
struct BookRow {
    exchange: String,
    timestamp: String,
    side: String,
    level: u32,
    price: f64,
    quantity: f64,
}

/// Raw per-side level rows grouped by (exchange, raw timestamp).
type LevelGroups = BTreeMap<(String, DateTime<Utc>), (Vec<(u32, f64, f64)>, Vec<(u32, f64, f64)>)>;

#[derive(Debug, Serialize, Deserialize)]
struct JsonlSnapshot {
    exchange: String,
    timestamp: String,
    bids: Vec<(f64, f64)>,
    asks: Vec<(f64, f64)>,
}

/// Parse statistics from an ingest pass.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct IngestStats {
    pub rows: usize,
    pub snapshots: usize,
    pub dropped_snapshots: usize,
}

/// Read the level CSV into minute-bucketed snapshots.
///
/// Rows are grouped by (exchange, raw timestamp) into snapshots; each
/// snapshot lands in its floor-minute bucket and the latest snapshot within
/// a bucket wins. Structurally invalid snapshots (crossed, unsorted, empty)
/// fail in strict mode and are dropped with a warning otherwise.
pub fn read_orderbooks_csv<R: Read>(
    reader: R,
    strict: bool,
) -> Result<(Vec<OrderbookSnapshot>, IngestStats)> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut groups = LevelGroups::new();
    let mut stats = IngestStats::default();
    for (i, row) in csv.deserialize::<BookRow>().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) if strict => return Err(e.into()),
            Err(e) => {
                warn!(line, error = %e, "dropping unparsable orderbook row");
                continue;
            }
        };
        stats.rows += 1;
        let Some(ts) = parse_timestamp(&row.timestamp) else {
            if strict {
                return Err(Error::Parse {
                    context: format!("orderbooks line {line}"),
                    reason: format!("bad timestamp {:?}", row.timestamp),
                });
            }
            warn!(line, "dropping row with bad timestamp");
            continue;
        };
        let entry = groups.entry((row.exchange, ts)).or_default();
        match row.side.as_str() {
            "bid" => entry.0.push((row.level, row.price, row.quantity)),
            "ask" => entry.1.push((row.level, row.price, row.quantity)),
            other => {
                if strict {
                    return Err(Error::Parse {
                        context: format!("orderbooks line {line}"),
                        reason: format!("side must be bid or ask, got {other:?}"),
                    });
                }
                warn!(line, side = other, "dropping row with unknown side");
            }
        }
    }

    assemble_snapshots(groups, strict, &mut stats).map(|snaps| (snaps, stats))
}

/// Read the JSON-lines form.
pub fn read_orderbooks_jsonl<R: BufRead>(
    reader: R,
    strict: bool,
) -> Result<(Vec<OrderbookSnapshot>, IngestStats)> {
    let mut groups = LevelGroups::new();
    let mut stats = IngestStats::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        stats.rows += 1;
        let snap: JsonlSnapshot = match serde_json::from_str(&text) {
            Ok(s) => s,
            Err(e) if strict => {
                return Err(Error::Parse {
                    context: format!("orderbooks jsonl line {line_no}"),
                    reason: e.to_string(),
                })
            }
            Err(e) => {
                warn!(line = line_no, error = %e, "dropping unparsable snapshot");
                continue;
            }
        };
        let Some(ts) = parse_timestamp(&snap.timestamp) else {
            if strict {
                return Err(Error::Parse {
                    context: format!("orderbooks jsonl line {line_no}"),
                    reason: format!("bad timestamp {:?}", snap.timestamp),
                });
            }
            warn!(line = line_no, "dropping snapshot with bad timestamp");
            continue;
        };
        let bids = snap.bids.iter().enumerate().map(|(k, &(p, q))| (k as u32 + 1, p, q)).collect();
        let asks = snap.asks.iter().enumerate().map(|(k, &(p, q))| (k as u32 + 1, p, q)).collect();
        groups.insert((snap.exchange, ts), (bids, asks));
    }
    assemble_snapshots(groups, strict, &mut stats).map(|snaps| (snaps, stats))
}

fn assemble_snapshots(
    groups: LevelGroups,
    strict: bool,
    stats: &mut IngestStats,
) -> Result<Vec<OrderbookSnapshot>> {
    // Latest observation within each (exchange, minute) bucket wins.
    let mut buckets: BTreeMap<(Minute, String), (DateTime<Utc>, OrderbookSnapshot)> = BTreeMap::new();
    for ((exchange, ts), (mut bids, mut asks)) in groups {
        bids.sort_by_key(|&(lvl, _, _)| lvl);
        asks.sort_by_key(|&(lvl, _, _)| lvl);
        let minute = Minute::from_datetime(ts);
        let snap = OrderbookSnapshot::new(
            exchange.clone(),
            minute,
            bids.into_iter().map(|(_, price, quantity)| Level { price, quantity }).collect(),
            asks.into_iter().map(|(_, price, quantity)| Level { price, quantity }).collect(),
        );
        match snap {
            Ok(s) => {
                let key = (minute, exchange);
                match buckets.get(&key) {
                    Some((seen, _)) if *seen >= ts => {}
                    _ => {
                        buckets.insert(key, (ts, s));
                    }
                }
            }
            Err(e) if strict => return Err(e),
            Err(e) => {
                stats.dropped_snapshots += 1;
                warn!(exchange, %ts, error = %e, "dropping invalid snapshot");
            }
        }
    }
    stats.snapshots = buckets.len();
    Ok(buckets.into_values().map(|(_, s)| s).collect())
}

/// Write snapshots back out in the canonical CSV form (sorted, minute
/// timestamps, 1-based levels).
pub fn write_orderbooks_csv<W: Write>(snapshots: &[OrderbookSnapshot], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["exchange", "timestamp", "side", "level", "price", "quantity"])?;
    for snap in snapshots {
        let ts = snap.timestamp.to_iso();
        for (side, levels) in [("bid", snap.bids()), ("ask", snap.asks())] {
            for (k, l) in levels.iter().enumerate() {
                w.write_record([
                    snap.exchange_id.as_str(),
                    ts.as_str(),
                    side,
                    &(k + 1).to_string(),
                    &l.price.to_string(),
                    &l.quantity.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_orderbooks_path(path: &Path, strict: bool) -> Result<(Vec<OrderbookSnapshot>, IngestStats)> {
    let f = std::fs::File::open(path).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let buf = std::io::BufReader::new(f);
    if path.extension().is_some_and(|e| e == "jsonl" || e == "ndjson") {
        read_orderbooks_jsonl(buf, strict)
    } else {
        read_orderbooks_csv(buf, strict)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileDoc {
    exchanges: Vec<ExchangeProfile>,
}

/// Read exchange profiles from a JSON or TOML document (by extension).
pub fn read_profiles(path: &Path) -> Result<Vec<ExchangeProfile>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let doc: ProfileDoc = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            reason: e.to_string(),
        })?
    } else {
        serde_json::from_str(&text)?
    };
    let mut seen = std::collections::BTreeSet::new();
    for p in &doc.exchanges {
        p.validate()?;
        if !seen.insert(p.exchange_id.clone()) {
            return Err(Error::Parse {
                context: path.display().to_string(),
                reason: format!("duplicate exchange {}", p.exchange_id),
            });
        }
    }
    Ok(doc.exchanges)
}

pub fn write_profiles_json(profiles: &[ExchangeProfile], path: &Path) -> Result<()> {
    let doc = ProfileDoc { exchanges: profiles.to_vec() };
    std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}
