//! Monte Carlo experiments over simulated data and the exhaustive oracles
//! used to check them.

mod figure1;
mod location;
mod pairwise;
mod plan;
mod select;
mod summary;

pub use figure1::{run_figure1, Figure1Output, Figure1Run, Figure1Series};
pub use location::{gls_mean, run_table1, sample_covariance_mean};
pub use pairwise::run_table3;
pub use plan::{Cell, Experiment, ExperimentPlan, Method};
pub use summary::{CellSummary, ExperimentSummary, MethodSummary, Outcome};

use crate::error::{Error, Result};
use crate::mask::ComponentMask;

/// Largest M accepted by [`brute_force_optimum`].
pub const MAX_ENUMERATION: usize = 20;

/// Exhaustive minimum over all non-zero masks, scanned in increasing code
/// order; the first mask attaining the minimum wins.
pub fn brute_force_optimum<F: FnMut(&ComponentMask) -> f64>(mut objective: F, m: usize) -> Result<(ComponentMask, f64)> {
    if m > MAX_ENUMERATION {
        return Err(Error::Guard {
            what: "component count",
            value: m,
            limit: MAX_ENUMERATION,
        });
    }
    if m == 0 {
        return Err(Error::InvalidConfig("no components to enumerate".into()));
    }
    let mut best: Option<(u64, f64)> = None;
    for code in 1..(1u64 << m) {
        let v = objective(&ComponentMask::from_code(m, code));
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((code, v));
        }
    }
    best.map(|(c, v)| (ComponentMask::from_code(m, c), v)).ok_or(Error::NoValidState)
}

pub fn hamming_distance(a: &ComponentMask, b: &ComponentMask) -> Result<usize> {
    a.hamming(b)
}

/// Minimum of the common-location variance objective over masks with `u`
/// uncorrelated and `c` correlated components. Returns (u, c, value); ties go
/// to the smaller total size.
pub fn location_structural_optimum(d: usize, d_star: usize, rho: f64) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for total in 1..=d {
        for c in total.saturating_sub(d - d_star)..=total.min(d_star) {
            let u = total - c;
            let (k, cf) = (total as f64, c as f64);
            let v = (k + rho * cf * (cf - 1.0)).ln() - 2.0 * k.ln();
            if v < best.2 {
                best = (u, c, v);
            }
        }
    }
    best
}

/// The first `u` uncorrelated and the first `c` correlated components.
pub fn location_oracle_mask(d: usize, d_star: usize, u: usize, c: usize) -> ComponentMask {
    let mut idx: Vec<usize> = (0..c).collect();
    idx.extend(d_star..d_star + u);
    ComponentMask::from_indices(d, &idx)
}
