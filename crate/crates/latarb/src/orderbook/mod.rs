//! Orderbook ingest and cross-exchange price differences.
//!
//! Snapshots are price/quantity ladders per exchange on a minute grid.
//! Operations: ladder walking with proportional taker fees, transaction-cost
//! adjusted price differences, return-maximizing trade quantities (plain and
//! with settlement fees against an endogenous bound), and the N×N
//! price-difference matrix.

mod book;
mod matrix;
mod optimize;

pub mod io;

pub use book::{walk_book, Level, OrderbookSnapshot, Side, MAX_DEPTH};
pub use matrix::{difference_matrix, PriceDifferenceMatrix};
pub use optimize::{
    optimal_quantity, optimal_quantity_fee, price_difference, FeeChoice, GridConfig,
    QuantityChoice, TradeOutcome,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confirmations assumed for exchanges that do not publish a requirement
/// (the cross-exchange median).
pub const DEFAULT_CONFIRMATIONS: u32 = 3;

/// Trading-related exchange metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeProfile {
    pub exchange_id: String,
    /// Proportional taker fee as a fraction of traded volume.
    pub taker_fee: f64,
    /// Withdrawal fee in units of the asset, charged on outgoing transfers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub withdrawal_fee: Option<f64>,
    /// Blocks required before a deposit is credited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confirmations: Option<u32>,
    /// Exchange offers margin/shorting instruments.
    #[serde(default)]
    pub margin: bool,
    /// Exchange admits business (institutional) accounts.
    #[serde(default)]
    pub business: bool,
}

impl ExchangeProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.taker_fee >= 0.0) || self.taker_fee >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "taker_fee",
                reason: format!("{}: must be in [0, 1), got {}", self.exchange_id, self.taker_fee),
            });
        }
        if let Some(w) = self.withdrawal_fee {
            if !(w >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "withdrawal_fee",
                    reason: format!("{}: must be >= 0, got {w}", self.exchange_id),
                });
            }
        }
        if let Some(b) = self.confirmations {
            if b < 1 {
                return Err(Error::InvalidParameter {
                    name: "confirmations",
                    reason: format!("{}: must be >= 1", self.exchange_id),
                });
            }
        }
        Ok(())
    }

    /// Withdrawal fee with the missing-value default of zero.
    pub fn effective_withdrawal_fee(&self) -> f64 {
        self.withdrawal_fee.unwrap_or(0.0)
    }

    /// Confirmation requirement with the missing-value default of
    /// [`DEFAULT_CONFIRMATIONS`].
    pub fn effective_confirmations(&self) -> u32 {
        self.confirmations.unwrap_or(DEFAULT_CONFIRMATIONS)
    }
}
