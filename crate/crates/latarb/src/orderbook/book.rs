//! Snapshot structure and ladder walking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Minute;

/// Maximum ladder depth retained per side.
pub const MAX_DEPTH: usize = 25;

/// One price level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub price: f64,
    pub quantity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bid,
    Ask,
}

/// A validated orderbook snapshot for one exchange and minute.
///
/// Bids are strictly descending in price, asks strictly ascending, all
/// prices and quantities strictly positive, and the book is not crossed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderbookSnapshot {
    pub exchange_id: String,
    pub timestamp: Minute,
    bids: Vec<Level>,
    asks: Vec<Level>,
}

impl OrderbookSnapshot {
    pub fn new(
        exchange_id: impl Into<String>,
        timestamp: Minute,
        bids: Vec<Level>,
        asks: Vec<Level>,
    ) -> Result<Self> {
        let exchange_id = exchange_id.into();
        let invalid = |reason: String| Error::InvalidBook { exchange: exchange_id.clone(), reason };
        if bids.is_empty() && asks.is_empty() {
            return Err(invalid("empty book".into()));
        }
        if bids.len() > MAX_DEPTH || asks.len() > MAX_DEPTH {
            return Err(invalid(format!(
                "depth exceeds {MAX_DEPTH} levels ({} bids, {} asks)",
                bids.len(),
                asks.len()
            )));
        }
        for (side, levels) in [("bid", &bids), ("ask", &asks)] {
            for l in levels.iter() {
                if !(l.price > 0.0) || !(l.quantity > 0.0) || !l.price.is_finite() || !l.quantity.is_finite() {
                    return Err(invalid(format!(
                        "{side} level with non-positive price or quantity ({}, {})",
                        l.price, l.quantity
                    )));
                }
            }
        }
        if bids.windows(2).any(|w| w[1].price >= w[0].price) {
            return Err(invalid("bid prices not strictly descending".into()));
        }
        if asks.windows(2).any(|w| w[1].price <= w[0].price) {
            return Err(invalid("ask prices not strictly ascending".into()));
        }
        if let (Some(b), Some(a)) = (bids.first(), asks.first()) {
            if b.price > a.price {
                return Err(invalid(format!("crossed book: best bid {} > best ask {}", b.price, a.price)));
            }
        }
        Ok(OrderbookSnapshot { exchange_id, timestamp, bids, asks })
    }

    pub fn bids(&self) -> &[Level] {
        &self.bids
    }

    pub fn asks(&self) -> &[Level] {
        &self.asks
    }

    pub fn best_bid(&self) -> Option<f64> {
        self.bids.first().map(|l| l.price)
    }

    pub fn best_ask(&self) -> Option<f64> {
        self.asks.first().map(|l| l.price)
    }

    /// Total quantity on the bid side.
    pub fn bid_depth(&self) -> f64 {
        self.bids.iter().map(|l| l.quantity).sum()
    }

    /// Total quantity on the ask side.
    pub fn ask_depth(&self) -> f64 {
        self.asks.iter().map(|l| l.quantity).sum()
    }
}

/// Volume-weighted average execution price for `quantity`, fee-adjusted.
///
/// Walks the ladder level by level; the proportional taker fee is applied
/// multiplicatively to the average price, `(1 + fee)` when buying into asks
/// and `(1 - fee)` when selling into bids. The implied per-unit cost is
/// monotone in quantity: non-decreasing on the ask side, non-increasing on
/// the bid side.
pub fn walk_book(levels: &[Level], quantity: f64, taker_fee: f64, side: Side) -> Result<f64> {
    if !(quantity > 0.0) {
        return Err(Error::InvalidParameter {
            name: "quantity",
            reason: format!("must be > 0, got {quantity}"),
        });
    }
    if levels.is_empty() {
        return Err(Error::InsufficientDepth { requested: quantity, available: 0.0 });
    }
    let mut remaining = quantity;
    let mut notional = 0.0;
    for level in levels {
        let take = remaining.min(level.quantity);
        notional += take * level.price;
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }
    if remaining > quantity * 1e-12 {
        let available: f64 = levels.iter().map(|l| l.quantity).sum();
        return Err(Error::InsufficientDepth { requested: quantity, available });
    }
    let vwap = notional / quantity;
    Ok(match side {
        Side::Ask => vwap * (1.0 + taker_fee),
        Side::Bid => vwap * (1.0 - taker_fee),
    })
}
