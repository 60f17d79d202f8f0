//! Return-maximizing trade quantities and settlement fees.
//!
//! The paper's strategy: walk both ladders, adjust for taker fees, and grid
//! search the quantity that maximizes total return. The quantity grid is
//! geometric from the minimum book increment to the common available depth,
//! augmented with the ladder breakpoints (total return is piecewise linear
//! and concave in quantity, so the optimum sits on a breakpoint).

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::orderbook::{walk_book, ExchangeProfile, OrderbookSnapshot, Side};

/// Grid-search settings for quantity and fee optimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Geometric quantity grid size (breakpoints are added on top).
    pub quantity_points: usize,
    /// Settlement-fee grid size, including the zero fee.
    pub fee_points: usize,
    /// Upper end of the fee grid as a fraction of the common depth.
    pub max_fee_fraction: f64,
    /// Deduct the withdrawal fee from transferred quantity instead of only
    /// thresholding the optimal quantity against it.
    pub deduct_withdrawal: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            quantity_points: 200,
            fee_points: 25,
            max_fee_fraction: 0.05,
            deduct_withdrawal: false,
        }
    }
}

impl GridConfig {
    /// Quantities to evaluate: geometric grid plus ladder breakpoints.
    pub fn quantity_grid(&self, sell_book: &OrderbookSnapshot, buy_book: &OrderbookSnapshot) -> Vec<f64> {
        let q_max = sell_book.bid_depth().min(buy_book.ask_depth());
        if q_max <= 0.0 {
            return Vec::new();
        }
        let min_level = sell_book
            .bids()
            .iter()
            .chain(buy_book.asks().iter())
            .map(|l| l.quantity)
            .fold(f64::INFINITY, f64::min);
        let lo = min_level.clamp(q_max * 1e-6, q_max);
        let n = self.quantity_points.max(2);
        let ratio = q_max / lo;
        let mut grid: Vec<f64> = (0..n)
            .map(|i| lo * ratio.powf(i as f64 / (n - 1) as f64))
            .collect();
        let mut acc = 0.0;
        for l in sell_book.bids() {
            acc += l.quantity;
            if acc < q_max {
                grid.push(acc);
            }
        }
        acc = 0.0;
        for l in buy_book.asks() {
            acc += l.quantity;
            if acc < q_max {
                grid.push(acc);
            }
        }
        grid.push(q_max);
        grid.retain(|q| *q > 0.0 && *q <= q_max);
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        grid
    }

    /// Settlement-fee grid in asset units: zero plus a geometric ramp.
    pub fn fee_grid(&self, q_max: f64) -> Vec<f64> {
        let mut grid = vec![0.0];
        if self.fee_points > 1 && q_max > 0.0 && self.max_fee_fraction > 0.0 {
            let hi = q_max * self.max_fee_fraction;
            let lo = hi * 1e-3;
            let n = self.fee_points - 1;
            for i in 0..n {
                grid.push(lo * (hi / lo).powf(i as f64 / (n.max(2) - 1) as f64));
            }
        }
        grid
    }
}

/// Result of a trade evaluation at fixed quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TradeOutcome {
    /// Transaction-cost adjusted log price difference at this quantity.
    Trade { delta: f64 },
    /// Quantity does not clear the buy-side withdrawal fee.
    NoTrade,
}

/// Transaction-cost adjusted log return of buying `quantity` on `buy_book`
/// and selling on `sell_book`: `ln(adjusted sell) - ln(adjusted buy)`.
///
/// A quantity at or below the buy-side withdrawal fee cannot be transferred
/// profitably at all and yields [`TradeOutcome::NoTrade`].
pub fn price_difference(
    buy_book: &OrderbookSnapshot,
    sell_book: &OrderbookSnapshot,
    buy_profile: &ExchangeProfile,
    sell_profile: &ExchangeProfile,
    quantity: f64,
) -> Result<TradeOutcome> {
    if quantity <= buy_profile.effective_withdrawal_fee() {
        return Ok(TradeOutcome::NoTrade);
    }
    let sell = walk_book(sell_book.bids(), quantity, sell_profile.taker_fee, Side::Bid)?;
    let buy = walk_book(buy_book.asks(), quantity, buy_profile.taker_fee, Side::Ask)?;
    Ok(TradeOutcome::Trade { delta: sell.ln() - buy.ln() })
}

/// Optimal quantity and its total return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantityChoice {
    /// Return-maximizing quantity; zero when no profitable trade exists.
    pub quantity: f64,
    /// Proceeds minus cost at the optimum, in quote currency.
    pub total_return: f64,
    /// Log price difference at the optimum, when trading.
    pub delta: Option<f64>,
}

impl QuantityChoice {
    fn idle() -> Self {
        QuantityChoice { quantity: 0.0, total_return: 0.0, delta: None }
    }
}

/// Grid-search the quantity maximizing total return.
///
/// Ties prefer the smaller quantity. The optimum is zero when no grid point
/// earns a positive return or when the best quantity does not exceed the
/// buy-side withdrawal fee.
pub fn optimal_quantity(
    buy_book: &OrderbookSnapshot,
    sell_book: &OrderbookSnapshot,
    buy_profile: &ExchangeProfile,
    sell_profile: &ExchangeProfile,
    cfg: &GridConfig,
) -> Result<QuantityChoice> {
    let grid = cfg.quantity_grid(sell_book, buy_book);
    if grid.is_empty() {
        return Ok(QuantityChoice::idle());
    }
    let withdrawal = buy_profile.effective_withdrawal_fee();
    let mut best = QuantityChoice::idle();
    for &q in &grid {
        let Some((ret, delta)) = evaluate_quantity(
            buy_book,
            sell_book,
            buy_profile,
            sell_profile,
            q,
            withdrawal,
            cfg.deduct_withdrawal,
        )?
        else {
            continue;
        };
        if ret > best.total_return {
            best = QuantityChoice { quantity: q, total_return: ret, delta: Some(delta) };
        }
    }
    if best.quantity == 0.0 {
        return Ok(QuantityChoice::idle());
    }
    if !cfg.deduct_withdrawal && best.quantity <= withdrawal {
        return Ok(QuantityChoice::idle());
    }
    Ok(best)
}

fn evaluate_quantity(
    buy_book: &OrderbookSnapshot,
    sell_book: &OrderbookSnapshot,
    buy_profile: &ExchangeProfile,
    sell_profile: &ExchangeProfile,
    q: f64,
    withdrawal: f64,
    deduct: bool,
) -> Result<Option<(f64, f64)>> {
    let sold = if deduct { q - withdrawal } else { q };
    if sold <= 0.0 {
        return Ok(None);
    }
    let sell_px = walk_book(sell_book.bids(), sold, sell_profile.taker_fee, Side::Bid)?;
    let buy_px = walk_book(buy_book.asks(), q, buy_profile.taker_fee, Side::Ask)?;
    let ret = sell_px * sold - buy_px * q;
    Ok(Some((ret, sell_px.ln() - buy_px.ln())))
}

/// Optimal quantity/fee pair against an endogenous bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeeChoice {
    pub quantity: f64,
    pub fee: f64,
    pub total_return: f64,
}

/// Jointly grid-search quantity and settlement fee, maximizing
/// `sell(q) q - buy(q + f) (q + f)` subject to the net price difference
/// clearing the fee-dependent bound `d(f)`.
///
/// `bound_fn` maps a settlement fee in asset units to the bound in log
/// return units and must be non-increasing for the trade-off to be
/// well-posed. Infeasibility at every grid point yields the idle choice
/// `(0, 0, 0)`; a fee is only paid when it buys enough extra feasible
/// quantity to cover its cost, so a flat bound always yields `f* = 0`.
pub fn optimal_quantity_fee(
    buy_book: &OrderbookSnapshot,
    sell_book: &OrderbookSnapshot,
    buy_profile: &ExchangeProfile,
    sell_profile: &ExchangeProfile,
    bound_fn: &dyn Fn(f64) -> f64,
    cfg: &GridConfig,
) -> Result<FeeChoice> {
    let grid = cfg.quantity_grid(sell_book, buy_book);
    if grid.is_empty() {
        return Ok(FeeChoice { quantity: 0.0, fee: 0.0, total_return: 0.0 });
    }
    let q_max = *grid.last().unwrap();
    let buy_depth = buy_book.ask_depth();
    let mut best = FeeChoice { quantity: 0.0, fee: 0.0, total_return: 0.0 };
    for &fee in &cfg.fee_grid(q_max) {
        let bound = bound_fn(fee);
        for &q in &grid {
            if q + fee > buy_depth {
                break;
            }
            let sell_px = walk_book(sell_book.bids(), q, sell_profile.taker_fee, Side::Bid)?;
            let buy_px = walk_book(buy_book.asks(), q + fee, buy_profile.taker_fee, Side::Ask)?;
            let delta = sell_px.ln() - buy_px.ln();
            if delta < bound {
                continue;
            }
            let ret = sell_px * q - buy_px * (q + fee);
            if ret > best.total_return {
                best = FeeChoice { quantity: q, fee, total_return: ret };
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orderbook::Level;
    use crate::time::Minute;
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

    fn profile(id: &str, taker: f64, withdrawal: Option<f64>) -> ExchangeProfile {
        ExchangeProfile {
            exchange_id: id.into(),
            taker_fee: taker,
            withdrawal_fee: withdrawal,
            confirmations: None,
            margin: false,
            business: false,
        }
    }

    #[test]
    fn price_difference_log_ratio() {
        let buy = book("B", &[(99.0, 5.0)], &[(100.0, 5.0)]);
        let sell = book("S", &[(102.0, 5.0)], &[(103.0, 5.0)]);
        let zero = profile("Z", 0.0, None);
        let TradeOutcome::Trade { delta } =
            price_difference(&buy, &sell, &zero, &zero, 1.0).unwrap()
        else {
            panic!("expected a trade")
        };
        assert_relative_eq!(delta, (102.0_f64 / 100.0).ln(), max_relative = 1e-12);
    }

    #[test]
    fn price_difference_with_taker_fees() {
        let buy = book("B", &[(99.0, 5.0)], &[(100.0, 5.0)]);
        let sell = book("S", &[(102.0, 5.0)], &[(103.0, 5.0)]);
        let fee = profile("F", 0.002, None);
        let TradeOutcome::Trade { delta } = price_difference(&buy, &sell, &fee, &fee, 1.0).unwrap()
        else {
            panic!("expected a trade")
        };
        assert_relative_eq!(
            delta,
            (102.0_f64 * 0.998).ln() - (100.0_f64 * 1.002).ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn identical_books_lose_the_spread() {
        let a = book("A", &[(99.5, 2.0)], &[(100.5, 2.0)]);
        let b = a.clone();
        let zero = profile("Z", 0.0, None);
        let TradeOutcome::Trade { delta } = price_difference(&a, &b, &zero, &zero, 2.0).unwrap()
        else {
            panic!("expected a trade")
        };
        assert!(delta < 0.0);
        assert_relative_eq!(delta, (99.5_f64 / 100.5).ln(), max_relative = 1e-12);
    }

    #[test]
    fn quantity_below_withdrawal_fee_is_no_trade() {
        let buy = book("B", &[(99.0, 5.0)], &[(100.0, 5.0)]);
        let sell = book("S", &[(102.0, 5.0)], &[(103.0, 5.0)]);
        let heavy = profile("W", 0.0, Some(1.5));
        let zero = profile("Z", 0.0, None);
        assert_eq!(
            price_difference(&buy, &sell, &heavy, &zero, 1.0).unwrap(),
            TradeOutcome::NoTrade
        );
    }

    #[test]
    fn uniformly_profitable_books_take_full_depth() {
        let buy = book("B", &[(99.0, 3.0)], &[(100.0, 1.0), (100.5, 2.0)]);
        let sell = book("S", &[(103.0, 2.0), (102.0, 2.0)], &[(104.0, 3.0)]);
        let zero = profile("Z", 0.0, None);
        let choice = optimal_quantity(&buy, &sell, &zero, &zero, &GridConfig::default()).unwrap();
        assert_relative_eq!(choice.quantity, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn second_level_loses_money() {
        // Buy asks (100,1),(103,1); sell bids (102,2): q=1 earns 2, q=2 earns 1.
        let buy = book("B", &[(95.0, 5.0)], &[(100.0, 1.0), (103.0, 1.0)]);
        let sell = book("S", &[(102.0, 2.0)], &[(106.0, 5.0)]);
        let zero = profile("Z", 0.0, None);
        let choice = optimal_quantity(&buy, &sell, &zero, &zero, &GridConfig::default()).unwrap();
        assert_relative_eq!(choice.quantity, 1.0, max_relative = 1e-12);
        assert_relative_eq!(choice.total_return, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn unprofitable_direction_stays_idle() {
        let buy = book("B", &[(99.0, 5.0)], &[(100.0, 5.0)]);
        let sell = book("S", &[(99.5, 5.0)], &[(100.5, 5.0)]);
        let zero = profile("Z", 0.0, None);
        let choice = optimal_quantity(&buy, &sell, &zero, &zero, &GridConfig::default()).unwrap();
        assert_eq!(choice.quantity, 0.0);
        assert_eq!(choice.total_return, 0.0);
    }

    #[test]
    fn withdrawal_threshold_zeroes_small_optima() {
        let buy = book("B", &[(95.0, 5.0)], &[(100.0, 1.0), (103.0, 1.0)]);
        let sell = book("S", &[(102.0, 2.0)], &[(106.0, 5.0)]);
        let zero = profile("Z", 0.0, None);
        let heavy = profile("W", 0.0, Some(1.0));
        // Optimal quantity is 1.0, which does not exceed the 1.0 withdrawal fee.
        let choice = optimal_quantity(&buy, &sell, &heavy, &zero, &GridConfig::default()).unwrap();
        assert_eq!(choice.quantity, 0.0);
    }

    #[test]
    fn zero_bound_reduces_to_optimal_quantity() {
        let buy = book("B", &[(95.0, 5.0)], &[(100.0, 1.0), (103.0, 1.0)]);
        let sell = book("S", &[(102.0, 2.0)], &[(106.0, 5.0)]);
        let zero = profile("Z", 0.0, None);
        let cfg = GridConfig::default();
        let plain = optimal_quantity(&buy, &sell, &zero, &zero, &cfg).unwrap();
        let with_fee =
            optimal_quantity_fee(&buy, &sell, &zero, &zero, &|_| 0.0, &cfg).unwrap();
        assert_eq!(with_fee.fee, 0.0);
        assert_relative_eq!(with_fee.quantity, plain.quantity, max_relative = 1e-12);
        assert_relative_eq!(with_fee.total_return, plain.total_return, max_relative = 1e-12);
    }

    #[test]
    fn flat_positive_bound_never_pays_a_fee() {
        let buy = book("B", &[(95.0, 5.0)], &[(100.0, 2.0), (100.2, 2.0)]);
        let sell = book("S", &[(102.0, 2.0), (101.8, 2.0)], &[(106.0, 5.0)]);
        let zero = profile("Z", 0.0, None);
        let choice = optimal_quantity_fee(
            &buy,
            &sell,
            &zero,
            &zero,
            &|_| 0.005, // constant in f: paying gains nothing
            &GridConfig::default(),
        )
        .unwrap();
        assert_eq!(choice.fee, 0.0);
        assert!(choice.quantity > 0.0);
    }

    #[test]
    fn infeasible_bound_stays_idle() {
        let buy = book("B", &[(95.0, 5.0)], &[(100.0, 2.0)]);
        let sell = book("S", &[(102.0, 2.0)], &[(106.0, 5.0)]);
        let zero = profile("Z", 0.0, None);
        let choice =
            optimal_quantity_fee(&buy, &sell, &zero, &zero, &|_| 1.0, &GridConfig::default())
                .unwrap();
        assert_eq!((choice.quantity, choice.fee, choice.total_return), (0.0, 0.0, 0.0));
    }

    #[test]
    fn steep_bound_buys_an_interior_fee() {
        // Level 2 still earns a positive margin but dilutes the average
        // price difference below the zero-fee bound; a bound that decays
        // fast in the fee unlocks that depth for less than it earns.
        let buy = book("B", &[(95.0, 9.0)], &[(100.0, 4.0), (100.6, 5.0)]);
        let sell = book("S", &[(101.5, 4.0), (100.9, 5.0)], &[(106.0, 9.0)]);
        let zero = profile("Z", 0.0, None);
        let cfg = GridConfig { fee_points: 40, max_fee_fraction: 0.005, ..GridConfig::default() };
        let delta_best = (101.5_f64 / 100.0).ln();
        let bound = move |f: f64| 0.9 * delta_best * (-400.0 * f).exp();
        let choice = optimal_quantity_fee(&buy, &sell, &zero, &zero, &bound, &cfg).unwrap();
        assert!(choice.fee > 0.0, "expected an interior fee, got {choice:?}");

        // Exhaustive oracle over the same grids.
        let grid = cfg.quantity_grid(&sell, &buy);
        let mut oracle = FeeChoice { quantity: 0.0, fee: 0.0, total_return: 0.0 };
        for &f in &cfg.fee_grid(*grid.last().unwrap()) {
            for &q in &grid {
                if q + f > buy.ask_depth() {
                    continue;
                }
                let s = walk_book(sell.bids(), q, 0.0, Side::Bid).unwrap();
                let b = walk_book(buy.asks(), q + f, 0.0, Side::Ask).unwrap();
                if s.ln() - b.ln() < bound(f) {
                    continue;
                }
                let ret = s * q - b * (q + f);
                if ret > oracle.total_return {
                    oracle = FeeChoice { quantity: q, fee: f, total_return: ret };
                }
            }
        }
        assert_eq!(choice, oracle);
    }
}
