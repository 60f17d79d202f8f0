//! Price differences in excess of arbitrage bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orderbook::PriceDifferenceMatrix;

/// Excess matrix, exceed indicators, and the share-within-bounds statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessMatrices {
    pub exchanges: Vec<String>,
    /// `(delta - d_sell) * 1{delta > d_sell}`, row = sell exchange.
    pub excess: Vec<Option<f64>>,
    /// `1{delta > d_sell}`.
    pub exceeds: Vec<Option<bool>>,
    /// Positive price differences observed (with a bound available).
    pub n_positive: usize,
    /// Of those, how many stay inside the bound.
    pub n_within: usize,
    /// `n_within / n_positive`; `None` when no positive difference exists.
    pub share_within: Option<f64>,
}

impl ExcessMatrices {
    pub fn n(&self) -> usize {
        self.exchanges.len()
    }

    pub fn excess_at(&self, sell: usize, buy: usize) -> Option<f64> {
        self.excess[sell * self.n() + buy]
    }
}

/// Subtract each sell-side exchange's bound from its matrix row and keep
/// only positive remainders.
///
/// `bounds[i]` is the bound of sell exchange `i` in log-return units;
/// `None` marks exchanges without a bound at this minute (their rows come
/// back missing and are excluded from the share statistic).
pub fn excess_differences(
    matrix: &PriceDifferenceMatrix,
    bounds: &[Option<f64>],
) -> Result<ExcessMatrices> {
    let n = matrix.n();
    if bounds.len() != n {
        return Err(Error::InvalidParameter {
            name: "bounds",
            reason: format!("matrix has {n} exchanges but {} bounds supplied", bounds.len()),
        });
    }
    let mut excess = vec![None; n * n];
    let mut exceeds = vec![None; n * n];
    let mut n_positive = 0usize;
    let mut n_within = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (Some(delta), Some(bound)) = (matrix.delta(i, j), bounds[i]) else {
                continue;
            };
            let over = delta > bound;
            exceeds[i * n + j] = Some(over);
            excess[i * n + j] = Some(if over { delta - bound } else { 0.0 });
            if delta > 0.0 {
                n_positive += 1;
                if !over {
                    n_within += 1;
                }
            }
        }
    }
    let share_within = (n_positive > 0).then(|| n_within as f64 / n_positive as f64);
    Ok(ExcessMatrices {
        exchanges: matrix.exchanges.clone(),
        excess,
        exceeds,
        n_positive,
        n_within,
        share_within,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orderbook::{difference_matrix, ExchangeProfile, GridConfig, Level, OrderbookSnapshot};
    use crate::time::Minute;
    use approx::assert_relative_eq;

    fn three_exchange_matrix() -> PriceDifferenceMatrix {
        let book = |ex: &str, bid: f64, ask: f64| {
            OrderbookSnapshot::new(
                ex,
                Minute(0),
                vec![Level { price: bid, quantity: 2.0 }],
                vec![Level { price: ask, quantity: 2.0 }],
            )
            .unwrap()
        };
        let profile = |id: &str| ExchangeProfile {
            exchange_id: id.into(),
            taker_fee: 0.0,
            withdrawal_fee: None,
            confirmations: None,
            margin: false,
            business: false,
        };
        let a = book("A", 100.0, 100.5);
        let b = book("B", 101.0, 101.5);
        let c = book("C", 102.0, 102.5);
        difference_matrix(
            &[profile("A"), profile("B"), profile("C")],
            &[Some(&a), Some(&b), Some(&c)],
            Minute(0),
            &GridConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn zero_bounds_return_the_input_matrix() {
        let m = three_exchange_matrix();
        let e = excess_differences(&m, &[Some(0.0); 3]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                assert_relative_eq!(e.excess_at(i, j).unwrap(), m.delta(i, j).unwrap());
            }
        }
        // Every positive difference exceeds a zero bound.
        assert_eq!(e.share_within, Some(0.0));
    }

    #[test]
    fn huge_bounds_zero_everything() {
        let m = three_exchange_matrix();
        let e = excess_differences(&m, &[Some(1.0); 3]).unwrap();
        assert!(e.excess.iter().flatten().all(|x| *x == 0.0));
        assert_eq!(e.share_within, Some(1.0));
        assert_eq!(e.n_positive, 3);
        assert_eq!(e.n_within, 3);
    }

    #[test]
    fn hand_computed_excess() {
        let m = three_exchange_matrix();
        // Bound only the C row, at half its biggest entry.
        let d_c = 0.5 * m.delta(2, 0).unwrap();
        let e = excess_differences(&m, &[Some(0.0), Some(0.0), Some(d_c)]).unwrap();
        assert_relative_eq!(
            e.excess_at(2, 0).unwrap(),
            m.delta(2, 0).unwrap() - d_c,
            max_relative = 1e-12
        );
        // (2,1) entry: ln(102/101.5) < d_c, so within bounds.
        assert_eq!(e.excess_at(2, 1), Some(0.0));
        assert_eq!(e.exceeds[2 * 3 + 1], Some(false));
    }

    #[test]
    fn missing_bounds_drop_rows() {
        let m = three_exchange_matrix();
        let e = excess_differences(&m, &[Some(0.0), None, Some(0.0)]).unwrap();
        assert!(e.excess_at(1, 0).is_none());
        assert!(e.excess_at(2, 0).is_some());
        assert!(excess_differences(&m, &[Some(0.0); 2]).is_err());
    }
}
