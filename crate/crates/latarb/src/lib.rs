//! Limits to arbitrage under stochastic settlement latency.
//!
//! When transferring an asset between markets takes a random settlement
//! time, an arbitrageur who buys on one exchange sells on the other only
//! after the price has diffused. This crate quantifies the resulting
//! no-trade region: it estimates spot volatility and conditional latency
//! distributions from data, evaluates closed-form and root-found arbitrage
//! bounds under risk-averse utility, derives return-maximizing trade
//! quantities and settlement fees from orderbooks, and validates every
//! formula against a Monte Carlo oracle.
//!
//! ## Modules
//!
//! - [`orderbook`]: snapshot ingest, ladder walking, transaction-cost
//!   adjusted price differences, optimal quantities/fees, difference
//!   matrices.
//! - [`volatility`]: one-sided Gaussian kernel spot-variance estimates with
//!   daily ISE bandwidth selection and tail trimming.
//! - [`latency`]: exponential/gamma duration models fitted by maximum
//!   likelihood, conditional latency moments, confirmation compounding.
//! - [`bounds`]: CRRA/CARA closed forms, the general certainty-equivalent
//!   root finder, excess price differences, implied risk aversion.
//! - [`simulator`]: reproducible Monte Carlo oracle (mixture moments,
//!   Laplace limit, indifference at the bound).
//! - [`pipeline`]: the `latarb` command-line pipeline and its file formats.
//!
//! ## Runnable examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example walk_orderbook
//! cargo run --release --example spot_volatility
//! cargo run --release --example latency_model
//! cargo run --release --example arbitrage_bounds
//! cargo run --release --example settlement_fee_tradeoff
//! cargo run --release --example implied_risk_aversion
//! cargo run --release --example monte_carlo_oracle
//! cargo run --release --example full_pipeline
//! ```
//!
//! Units are a crate-wide contract: prices in quote currency, quantities in
//! asset units, time in minutes, volatility per √minute, latency moments in
//! minutes and minutes², bounds in log returns (1e4 × log return = basis
//! points).

// Validation deliberately spells `!(x > 0.0)` so NaN fails the check;
// rewriting as `x <= 0.0` would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops in the small dense linear algebra mirror the math.
#![allow(clippy::needless_range_loop)]

pub mod bounds;
pub mod error;
pub mod fixture;
pub mod latency;
pub mod orderbook;
pub mod pipeline;
pub mod simulator;
pub mod time;
pub mod volatility;

pub use error::{Error, Result};
