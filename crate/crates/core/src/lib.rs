//! Imaging of pulsed moving sources from multi-frequency far-field data.
//!
//! The pipeline synthesizes far-field bands for each pulse ([`forward`]),
//! assembles the discrete far-field operator ([`operator`]), builds the
//! positive operator `F_#` and its eigensystem ([`spectral`]) and evaluates
//! Picard-series indicators over space and time ([`imaging`]).
//! [`pipeline`] wires these into scenario runs that write CSV/PGM artifacts.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod forward;
pub mod geometry;
pub mod imaging;
pub mod matrix;
pub mod operator;
pub mod pipeline;
pub mod spectral;

/// C-style `%.12e` formatting (`1.500000000000e+00`).
pub fn fmt_e(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.12e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}
