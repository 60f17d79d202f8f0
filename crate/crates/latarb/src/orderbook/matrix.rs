//! Cross-exchange price-difference matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orderbook::{optimal_quantity, ExchangeProfile, GridConfig, OrderbookSnapshot};
use crate::time::Minute;

/// N×N matrix of non-negative transaction-cost adjusted log price
/// differences at one minute, with the return-maximizing quantities.
///
/// Entry `(i, j)` is the difference from buying on exchange `j` and selling
/// on exchange `i`; the diagonal is zero and unprofitable directions are
/// floored at zero. `None` marks pairs where a snapshot was missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceDifferenceMatrix {
    pub timestamp: Minute,
    pub exchanges: Vec<String>,
    deltas: Vec<Option<f64>>,
    quantities: Vec<Option<f64>>,
}

impl PriceDifferenceMatrix {
    pub fn n(&self) -> usize {
        self.exchanges.len()
    }

    /// Log price difference for selling on `sell` and buying on `buy`.
    pub fn delta(&self, sell: usize, buy: usize) -> Option<f64> {
        self.deltas[sell * self.n() + buy]
    }

    pub fn quantity(&self, sell: usize, buy: usize) -> Option<f64> {
        self.quantities[sell * self.n() + buy]
    }

    /// Iterate present off-diagonal entries as `(sell, buy, delta, quantity)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| {
            (0..n).filter_map(move |j| {
                if i == j {
                    return None;
                }
                match (self.delta(i, j), self.quantity(i, j)) {
                    (Some(d), Some(q)) => Some((i, j, d, q)),
                    _ => None,
                }
            })
        })
    }
}

/// Assemble the matrix from one snapshot per exchange at a common minute.
///
/// `snapshots[k]` belongs to `profiles[k]`; `None` marks exchanges without a
/// usable snapshot at this minute, whose rows and columns come back missing.
/// Requires at least two present snapshots.
pub fn difference_matrix(
    profiles: &[ExchangeProfile],
    snapshots: &[Option<&OrderbookSnapshot>],
    timestamp: Minute,
    cfg: &GridConfig,
) -> Result<PriceDifferenceMatrix> {
    if profiles.len() != snapshots.len() {
        return Err(Error::InvalidParameter {
            name: "snapshots",
            reason: format!("{} profiles but {} snapshots", profiles.len(), snapshots.len()),
        });
    }
    let present = snapshots.iter().filter(|s| s.is_some()).count();
    if present < 2 {
        return Err(Error::InvalidParameter {
            name: "snapshots",
            reason: format!("need at least 2 exchanges with snapshots, got {present}"),
        });
    }
    let n = profiles.len();
    let mut deltas = vec![None; n * n];
    let mut quantities = vec![None; n * n];
    for (i, sell_snap) in snapshots.iter().enumerate() {
        for (j, buy_snap) in snapshots.iter().enumerate() {
            if i == j {
                if sell_snap.is_some() {
                    deltas[i * n + i] = Some(0.0);
                    quantities[i * n + i] = Some(0.0);
                }
                continue;
            }
            let (Some(sell_book), Some(buy_book)) = (sell_snap, buy_snap) else {
                continue;
            };
            let choice = optimal_quantity(buy_book, sell_book, &profiles[j], &profiles[i], cfg)?;
            if choice.quantity > 0.0 {
                deltas[i * n + j] = Some(choice.delta.unwrap_or(0.0).max(0.0));
                quantities[i * n + j] = Some(choice.quantity);
            } else {
                deltas[i * n + j] = Some(0.0);
                quantities[i * n + j] = Some(0.0);
            }
        }
    }
    Ok(PriceDifferenceMatrix {
        timestamp,
        exchanges: profiles.iter().map(|p| p.exchange_id.clone()).collect(),
        deltas,
        quantities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orderbook::Level;
    use approx::assert_relative_eq;

    fn book(ex: &str, bids: &[(f64, f64)], asks: &[(f64, f64)]) -> OrderbookSnapshot {
        OrderbookSnapshot::new(
            ex,
            Minute(0),
            bids.iter().map(|&(price, quantity)| Level { price, quantity }).collect(),
            asks.iter().map(|&(price, quantity)| Level { price, quantity }).collect(),
        )
        .unwrap()
    }

    fn profile(id: &str, taker: f64) -> ExchangeProfile {
        ExchangeProfile {
            exchange_id: id.into(),
            taker_fee: taker,
            withdrawal_fee: None,
            confirmations: None,
            margin: false,
            business: false,
        }
    }

    #[test]
    fn identical_books_give_a_zero_matrix() {
        let a = book("A", &[(99.5, 2.0)], &[(100.5, 2.0)]);
        let b = book("B", &[(99.5, 2.0)], &[(100.5, 2.0)]);
        let profiles = vec![profile("A", 0.0), profile("B", 0.0)];
        let m = difference_matrix(
            &profiles,
            &[Some(&a), Some(&b)],
            Minute(0),
            &GridConfig::default(),
        )
        .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m.delta(i, j), Some(0.0));
            }
        }
    }

    #[test]
    fn one_sided_premium_has_one_positive_entry() {
        let cheap = book("A", &[(99.5, 2.0)], &[(100.0, 2.0)]);
        let rich = book("B", &[(102.0, 2.0)], &[(102.5, 2.0)]);
        let profiles = vec![profile("A", 0.0), profile("B", 0.0)];
        let m = difference_matrix(
            &profiles,
            &[Some(&cheap), Some(&rich)],
            Minute(0),
            &GridConfig::default(),
        )
        .unwrap();
        // Sell on B (rich), buy on A (cheap): positive; the reverse: floored.
        assert!(m.delta(1, 0).unwrap() > 0.0);
        assert_eq!(m.delta(0, 1), Some(0.0));
        assert_relative_eq!(m.delta(1, 0).unwrap(), (102.0_f64 / 100.0).ln(), max_relative = 1e-12);
    }

    #[test]
    fn three_exchange_hand_computation() {
        let a = book("A", &[(100.0, 1.0)], &[(100.5, 1.0)]);
        let b = book("B", &[(101.0, 1.0)], &[(101.5, 1.0)]);
        let c = book("C", &[(102.0, 1.0)], &[(102.5, 1.0)]);
        let profiles = vec![profile("A", 0.0), profile("B", 0.0), profile("C", 0.0)];
        let m = difference_matrix(
            &profiles,
            &[Some(&a), Some(&b), Some(&c)],
            Minute(0),
            &GridConfig::default(),
        )
        .unwrap();
        // Sell on C, buy on A: ln(102/100.5); sell on B, buy on A: ln(101/100.5).
        assert_relative_eq!(m.delta(2, 0).unwrap(), (102.0_f64 / 100.5).ln(), max_relative = 1e-12);
        assert_relative_eq!(m.delta(1, 0).unwrap(), (101.0_f64 / 100.5).ln(), max_relative = 1e-12);
        assert_relative_eq!(m.delta(2, 1).unwrap(), (102.0_f64 / 101.5).ln(), max_relative = 1e-12);
        // All reverse directions floored at zero.
        assert_eq!(m.delta(0, 1), Some(0.0));
        assert_eq!(m.delta(0, 2), Some(0.0));
        assert_eq!(m.delta(1, 2), Some(0.0));
        assert_eq!(m.entries().count(), 6);
    }

    #[test]
    fn missing_snapshot_marks_rows_and_columns() {
        let a = book("A", &[(99.5, 2.0)], &[(100.0, 2.0)]);
        let b = book("B", &[(102.0, 2.0)], &[(102.5, 2.0)]);
        let profiles = vec![profile("A", 0.0), profile("B", 0.0), profile("C", 0.0)];
        let m = difference_matrix(
            &profiles,
            &[Some(&a), Some(&b), None],
            Minute(0),
            &GridConfig::default(),
        )
        .unwrap();
        assert!(m.delta(2, 0).is_none());
        assert!(m.delta(0, 2).is_none());
        assert!(m.delta(2, 2).is_none());
        assert!(m.delta(1, 0).is_some());
    }

    #[test]
    fn too_few_snapshots_is_an_error() {
        let a = book("A", &[(99.5, 2.0)], &[(100.0, 2.0)]);
        let profiles = vec![profile("A", 0.0), profile("B", 0.0)];
        assert!(difference_matrix(
            &profiles,
            &[Some(&a), None],
            Minute(0),
            &GridConfig::default()
        )
        .is_err());
    }

    #[test]
    fn higher_taker_fees_weakly_shrink_entries() {
        let cheap = book("A", &[(99.5, 3.0)], &[(100.0, 1.0), (100.4, 2.0)]);
        let rich = book("B", &[(102.0, 1.0), (101.5, 2.0)], &[(102.5, 3.0)]);
        let low = vec![profile("A", 0.0005), profile("B", 0.0005)];
        let high = vec![profile("A", 0.003), profile("B", 0.003)];
        let cfg = GridConfig::default();
        let m_low =
            difference_matrix(&low, &[Some(&cheap), Some(&rich)], Minute(0), &cfg).unwrap();
        let m_high =
            difference_matrix(&high, &[Some(&cheap), Some(&rich)], Minute(0), &cfg).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(m_high.delta(i, j).unwrap() <= m_low.delta(i, j).unwrap() + 1e-15);
                assert!(m_high.quantity(i, j).unwrap() <= m_low.quantity(i, j).unwrap() + 1e-15);
            }
        }
    }
}
