//! Robust pricing and hedging of double no-touch options.
//!
//! Given vanilla call quotes (and optionally digital calls at the barriers)
//! the crate
//!
//! * checks the quotes for model-free, weak and WFLVR-type arbitrage,
//! * computes the sharp model-free price bounds for the double no-touch
//!   payoff `1{b < min S, max S < b̄}`, both for a full call curve and for a
//!   finite strike grid,
//! * builds the semi-static super- and sub-hedges that realise those bounds,
//! * simulates the Perkins and tilted-Jacka Skorokhod embeddings that attain
//!   them, and
//! * runs a Heston hedging backtest comparing the robust hedge with a
//!   Black-Scholes delta/vega hedge.
//!
//! All curves are piecewise linear, so implied laws are purely atomic and
//! every bound formula is evaluated exactly on the atom grid.

// `!(x > 0.0)` is the NaN-rejecting form used for input validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arbitrage;
pub mod bounds;
pub mod embedding;
pub mod error;
pub mod hedging;
pub mod market;
pub mod simulate;

pub use error::{DntError, Result};

/// Exact-comparison tolerance for prices, relative to the spot.
pub const PRICE_TOL: f64 = 1e-12;

/// Tolerance used for the equality tests that define weak arbitrage.
pub const EQUALITY_TOL: f64 = 1e-9;

/// Absolute price tolerance for a market with spot `s0`.
#[inline]
pub fn price_tol(s0: f64) -> f64 {
    PRICE_TOL * s0.abs().max(1.0)
}

/// Formats a number with 12 significant digits in plain notation.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-6..=15).contains(&mag) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" {
            "0".to_string()
        } else {
            t.to_string()
        }
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_sig_rounds_to_twelve_digits() {
        assert_eq!(fmt_sig(11.0 / 15.0), "0.733333333333");
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(2.006), "2.006");
        assert_eq!(fmt_sig(1234.5678), "1234.5678");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(-1e-20), "-1.00000000000e-20");
    }
}
