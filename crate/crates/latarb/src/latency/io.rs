//! File formats for network data and fitted models.
//!
//! Transactions CSV: `tx_id,announce_time,inclusion_time,fee_per_byte,size,mempool_size`.
//! Blocks CSV: `height,timestamp`. Timestamps are UTC ISO-8601.

use std::io::Read;
use std::path::Path;

use serde::Deserialize;
use tracing::warn;

use crate::error::{Error, Result};
use crate::latency::{BlockRecord, LatencyModel, TxRecord};
use crate::time::parse_timestamp;

#[derive(Debug, Deserialize)]
struct TxRow {
    tx_id: String,
    announce_time: String,
    inclusion_time: String,
    fee_per_byte: f64,
    size: u64,
    mempool_size: u64,
}

#[derive(Debug, Deserialize)]
struct BlockRow {
    height: u64,
    timestamp: String,
}

/// Parse the transactions CSV. In strict mode any bad row is an error;
/// otherwise bad rows are dropped with a warning and counted.
pub fn read_transactions<R: Read>(reader: R, strict: bool) -> Result<(Vec<TxRecord>, usize)> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    let mut dropped = 0usize;
    for (i, row) in csv.deserialize::<TxRow>().enumerate() {
        let line = i + 2;
        let parsed: Result<TxRecord> = row.map_err(Error::from).and_then(|r| {
            let announce = parse_timestamp(&r.announce_time).ok_or_else(|| Error::Parse {
                context: format!("transactions line {line}"),
                reason: format!("bad announce_time {:?}", r.announce_time),
            })?;
            let inclusion = parse_timestamp(&r.inclusion_time).ok_or_else(|| Error::Parse {
                context: format!("transactions line {line}"),
                reason: format!("bad inclusion_time {:?}", r.inclusion_time),
            })?;
            let rec = TxRecord {
                tx_id: r.tx_id,
                announce_time: announce,
                first_inclusion_time: inclusion,
                fee_per_byte: r.fee_per_byte,
                size: r.size,
                mempool_size: r.mempool_size,
            };
            rec.validate()?;
            Ok(rec)
        });
        match parsed {
            Ok(rec) => out.push(rec),
            Err(e) if strict => return Err(e),
            Err(e) => {
                dropped += 1;
                warn!(line, error = %e, "dropping transaction row");
            }
        }
    }
    Ok((out, dropped))
}

pub fn read_transactions_path(path: &Path, strict: bool) -> Result<(Vec<TxRecord>, usize)> {
    let f = std::fs::File::open(path).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        reason: e.to_string(),
    })?;
    read_transactions(std::io::BufReader::new(f), strict)
}

/// Parse the blocks CSV.
pub fn read_blocks<R: Read>(reader: R, strict: bool) -> Result<Vec<BlockRecord>> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in csv.deserialize::<BlockRow>().enumerate() {
        let line = i + 2;
        match row {
            Ok(r) => match parse_timestamp(&r.timestamp) {
                Some(ts) => out.push(BlockRecord { height: r.height, timestamp: ts }),
                None if strict => {
                    return Err(Error::Parse {
                        context: format!("blocks line {line}"),
                        reason: format!("bad timestamp {:?}", r.timestamp),
                    })
                }
                None => warn!(line, "dropping block row with bad timestamp"),
            },
            Err(e) if strict => return Err(e.into()),
            Err(e) => warn!(line, error = %e, "dropping block row"),
        }
    }
    out.sort_by_key(|b| b.height);
    Ok(out)
}

pub fn read_blocks_path(path: &Path, strict: bool) -> Result<Vec<BlockRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        reason: e.to_string(),
    })?;
    read_blocks(std::io::BufReader::new(f), strict)
}

/// Serialize a fitted model to pretty JSON.
pub fn write_model(model: &LatencyModel, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(model)?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<LatencyModel> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
tx_id,announce_time,inclusion_time,fee_per_byte,size,mempool_size
a1,2021-03-01T00:00:00Z,2021-03-01T00:09:30Z,14.0,250,4500
a2,2021-03-01T00:01:00Z,2021-03-01T00:05:00Z,45.5,372,4600
bad,2021-03-01T00:01:00Z,2021-03-01T00:00:00Z,1.0,200,100
";

    #[test]
    fn lenient_parse_drops_bad_rows() {
        let (recs, dropped) = read_transactions(SAMPLE.as_bytes(), false).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(dropped, 1);
        assert!((recs[0].latency_minutes() - 9.5).abs() < 1e-9);
    }

    #[test]
    fn strict_parse_fails_on_bad_row() {
        assert!(read_transactions(SAMPLE.as_bytes(), true).is_err());
    }

    #[test]
    fn blocks_sorted_by_height() {
        let csv = "height,timestamp\n12,2021-03-01T00:20:00Z\n11,2021-03-01T00:10:00Z\n";
        let blocks = read_blocks(csv.as_bytes(), true).unwrap();
        assert_eq!(blocks[0].height, 11);
        assert_eq!(blocks[1].height, 12);
    }
}
