//! Transaction and block records.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Day;

/// One observed blockchain transaction, from announcement to first inclusion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TxRecord {
    pub tx_id: String,
    pub announce_time: DateTime<Utc>,
    pub first_inclusion_time: DateTime<Utc>,
    /// Satoshi per byte.
    pub fee_per_byte: f64,
    /// Transaction size in bytes.
    pub size: u64,
    /// Number of pending transactions at announcement.
    pub mempool_size: u64,
}

impl TxRecord {
    pub fn validate(&self) -> Result<()> {
        if self.latency_minutes() <= 0.0 {
            return Err(Error::Parse {
                context: format!("transaction {}", self.tx_id),
                reason: "inclusion time must be after announcement".into(),
            });
        }
        if !(self.fee_per_byte >= 0.0) {
            return Err(Error::Parse {
                context: format!("transaction {}", self.tx_id),
                reason: format!("fee_per_byte must be >= 0, got {}", self.fee_per_byte),
            });
        }
        if self.mempool_size < 1 {
            return Err(Error::Parse {
                context: format!("transaction {}", self.tx_id),
                reason: "mempool_size must be >= 1".into(),
            });
        }
        Ok(())
    }

    /// Confirmation latency in minutes.
    pub fn latency_minutes(&self) -> f64 {
        (self.first_inclusion_time - self.announce_time).num_milliseconds() as f64 / 60_000.0
    }

    /// Day the transaction was confirmed on; daily refits key on this.
    pub fn inclusion_day(&self) -> Day {
        Day(self.first_inclusion_time.timestamp().div_euclid(86_400))
    }
}

/// One mined block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockRecord {
    pub height: u64,
    pub timestamp: DateTime<Utc>,
}

impl BlockRecord {
    /// Timestamp in minutes since the Unix epoch.
    pub fn minutes(&self) -> f64 {
        self.timestamp.timestamp() as f64 / 60.0
    }
}
