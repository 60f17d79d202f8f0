//! Implied relative risk aversion.
//!
//! Inverts the CRRA bound relation: given an observed net price difference
//! `delta`, spot volatility, and latency moments `(c1, c2)`, the implied
//! gamma is the risk aversion at which `delta` sits exactly on the bound.
//! It solves the cubic
//!
//! ```text
//! s⁴ c2 / 8 g³ + 3 s⁴ c2 / 8 g² + (s² c1 delta² / 2 + s⁴ c2 / 4) g = delta⁴,
//! ```
//!
//! which has exactly one positive real root (all left-hand coefficients are
//! positive). Any arbitrageur with risk aversion below the root would trade.

use crate::error::{Error, Result};

/// Unique positive root of the implied-risk-aversion cubic.
///
/// `delta` is the transaction-cost-adjusted log price difference, `c1`/`c2`
/// the first/second noncentral moments of the total settlement latency.
pub fn implied_gamma(delta: f64, sigma: f64, c1: f64, c2: f64) -> Result<f64> {
    if !(delta > 0.0) || !(sigma > 0.0) || !(c1 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "implied_gamma",
            reason: format!("need delta, sigma, c1 > 0; got delta={delta}, sigma={sigma}, c1={c1}"),
        });
    }
    if !(c2 >= c1 * c1 * (1.0 - 1e-12)) {
        return Err(Error::InvalidParameter {
            name: "c2",
            reason: format!("must be >= c1^2 = {}, got {c2}", c1 * c1),
        });
    }
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let a3 = s4 * c2 / 8.0;
    let a2 = 3.0 * s4 * c2 / 8.0;
    let a1 = 0.5 * s2 * c1 * delta * delta + 0.25 * s4 * c2;
    let d4 = delta.powi(4);
    let p = |g: f64| ((a3 * g + a2) * g + a1) * g - d4;

    // p(0) < 0 and p is strictly increasing on g > 0.
    let mut hi = 1.0_f64;
    let mut expansions = 0;
    while p(hi) < 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 600 {
            return Err(Error::RootBracketing {
                details: format!("implied gamma did not bracket below {hi}"),
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = p(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Market-level implied risk aversion: the smallest gamma at which every
/// observed positive price difference is inside its bound, i.e. the maximum
/// of the pairwise implied gammas.
///
/// Entries are `(delta, sigma, c1, c2)` per (buy, sell) pair; non-positive
/// deltas are no-trade observations and are skipped. Returns `None` when no
/// entry has a positive difference.
pub fn implied_gamma_market(entries: &[(f64, f64, f64, f64)]) -> Result<Option<f64>> {
    let mut max: Option<f64> = None;
    for &(delta, sigma, c1, c2) in entries {
        if delta <= 0.0 {
            continue;
        }
        let g = implied_gamma(delta, sigma, c1, c2)?;
        max = Some(match max {
            Some(m) => m.max(g),
            None => g,
        });
    }
    Ok(max)
}
