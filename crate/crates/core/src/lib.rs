//! Bivariate joint-density estimation by maximum copula entropy, with
//! T2-Hotelling control limits and run-length analysis on top of the
//! fitted density.
//!
//! The pipeline: rank-based dependence measures from data, Shannon maxent
//! marginals under mean constraints, a maxent copula density under
//! uniform-margin power moments plus the measured dependence moments, the
//! Sklar composition of the three, and control limits solved from the
//! coverage integral of the joint density.

#![forbid(unsafe_code)]
// negated float comparisons like `!(det > 0.0)` are deliberate: they treat
// NaN as a validation failure
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arl;
pub mod control;
pub mod copula;
pub mod error;
pub mod joint;
pub mod margin;
pub mod numerics;
pub mod phase1;
pub mod ranks;

pub use error::{Error, Result};

/// Formats a float with 9 significant digits (fixture-diff friendly).
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..=8).contains(&mag) {
        let decimals = (8 - mag).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{:.8e}", x)
    }
}
