//! Per-minute latency covariates derived from the transaction stream.
//!
//! The duration model conditions on the fee an arbitrageur would attach and
//! the mempool congestion at decision time. Neither is directly observable
//! per minute, so the pipeline proxies them from announced transactions:
//! the mempool size of the latest announcement at or before the minute, and
//! the median fee per byte among announcements in the minute (carried
//! forward through empty minutes, seeded with the sample medians).

use std::collections::BTreeMap;

use crate::latency::TxRecord;
use crate::time::Minute;

#[derive(Debug, Clone)]
pub struct MinuteCovariates {
    fee_by_minute: BTreeMap<Minute, f64>,
    mempool_by_minute: BTreeMap<Minute, f64>,
    fallback_fee: f64,
    fallback_mempool: f64,
}

impl MinuteCovariates {
    pub fn build(records: &[TxRecord]) -> Self {
        let mut fees: BTreeMap<Minute, Vec<f64>> = BTreeMap::new();
        let mut mempool: BTreeMap<Minute, (chrono::DateTime<chrono::Utc>, f64)> = BTreeMap::new();
        for rec in records {
            let minute = Minute::from_datetime(rec.announce_time);
            fees.entry(minute).or_default().push(rec.fee_per_byte);
            let entry = mempool.entry(minute).or_insert((rec.announce_time, rec.mempool_size as f64));
            if rec.announce_time >= entry.0 {
                *entry = (rec.announce_time, rec.mempool_size as f64);
            }
        }
        let fee_by_minute = fees.into_iter().map(|(m, v)| (m, median(v))).collect();
        let mempool_by_minute = mempool.into_iter().map(|(m, (_, v))| (m, v)).collect();
        let all_fees: Vec<f64> = records.iter().map(|r| r.fee_per_byte).collect();
        let all_mem: Vec<f64> = records.iter().map(|r| r.mempool_size as f64).collect();
        MinuteCovariates {
            fee_by_minute,
            mempool_by_minute,
            fallback_fee: if all_fees.is_empty() { 1.0 } else { median(all_fees) },
            fallback_mempool: if all_mem.is_empty() { 1.0 } else { median(all_mem) },
        }
    }

    /// Raw (untransformed) fee per byte at the minute.
    pub fn fee_at(&self, minute: Minute) -> f64 {
        self.fee_by_minute
            .range(..=minute)
            .next_back()
            .map(|(_, v)| *v)
            .unwrap_or(self.fallback_fee)
    }

    /// Mempool size at the minute.
    pub fn mempool_at(&self, minute: Minute) -> f64 {
        self.mempool_by_minute
            .range(..=minute)
            .next_back()
            .map(|(_, v)| *v)
            .unwrap_or(self.fallback_mempool)
    }

    /// Design row `[1, ln(1 + fee), ln(mempool)]` at the minute, matching
    /// the standard covariate schema.
    pub fn design_row(&self, minute: Minute) -> Vec<f64> {
        vec![1.0, self.fee_at(minute).ln_1p(), self.mempool_at(minute).max(1.0).ln()]
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
