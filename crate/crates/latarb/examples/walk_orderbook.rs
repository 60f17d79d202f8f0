//! Ladder walking and return-maximizing trade quantities.
//!
//! Builds two small synthetic books, walks them at increasing quantities,
//! and grid-searches the quantity that maximizes total return after taker
//! and withdrawal fees.
//!
//! ```bash
//! cargo run --release --example walk_orderbook
//! ```

use latarb::orderbook::{
    optimal_quantity, price_difference, walk_book, ExchangeProfile, GridConfig, Level,
    OrderbookSnapshot, Side, TradeOutcome,
};
use latarb::time::Minute;

fn book(ex: &str, bids: &[(f64, f64)], asks: &[(f64, f64)]) -> OrderbookSnapshot {
    OrderbookSnapshot::new(
        ex,
        Minute(0),
        bids.iter().map(|&(price, quantity)| Level { price, quantity }).collect(),
        asks.iter().map(|&(price, quantity)| Level { price, quantity }).collect(),
    )
    .unwrap()
}

fn main() {
    // Cheap venue to buy on, rich venue to sell on.
    let buy = book(
        "CHEAP",
        &[(44_980.0, 1.2), (44_975.0, 2.0)],
        &[(45_000.0, 0.8), (45_012.0, 1.5), (45_040.0, 2.5)],
    );
    let sell = book(
        "RICH",
        &[(45_310.0, 0.9), (45_295.0, 1.4), (45_250.0, 2.2)],
        &[(45_330.0, 1.0)],
    );
    let buy_profile = ExchangeProfile {
        exchange_id: "CHEAP".into(),
        taker_fee: 0.001,
        withdrawal_fee: Some(0.0005),
        confirmations: Some(2),
        margin: false,
        business: true,
    };
    let sell_profile = ExchangeProfile {
        exchange_id: "RICH".into(),
        taker_fee: 0.002,
        withdrawal_fee: None,
        confirmations: None,
        margin: true,
        business: true,
    };

    println!("average execution price by quantity (fee-adjusted)");
    println!("{:>8} {:>12} {:>12} {:>10}", "qty", "buy avg", "sell avg", "delta bp");
    for q in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let b = walk_book(buy.asks(), q, buy_profile.taker_fee, Side::Ask).unwrap();
        let s = walk_book(sell.bids(), q, sell_profile.taker_fee, Side::Bid).unwrap();
        match price_difference(&buy, &sell, &buy_profile, &sell_profile, q).unwrap() {
            TradeOutcome::Trade { delta } => {
                println!("{q:>8.2} {b:>12.2} {s:>12.2} {:>10.1}", delta * 1e4);
            }
            TradeOutcome::NoTrade => {
                println!("{q:>8.2} {b:>12.2} {s:>12.2} {:>10}", "no trade");
            }
        }
    }

    let choice = optimal_quantity(&buy, &sell, &buy_profile, &sell_profile, &GridConfig::default())
        .unwrap();
    println!();
    println!(
        "optimal quantity {:.4} BTC, total return {:.2} USD, net difference {:.1} bp",
        choice.quantity,
        choice.total_return,
        choice.delta.unwrap_or(0.0) * 1e4
    );
    println!(
        "(withdrawal fee threshold: trades at or below {} BTC are discarded)",
        buy_profile.effective_withdrawal_fee()
    );
}
