//! Standard normal density and interval probabilities with exact handling of
//! infinite endpoints.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

#[inline]
pub fn pdf(z: f64) -> f64 {
    if z.is_infinite() {
        return 0.0;
    }
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Φ(z); exactly 0 at −∞ and 1 at +∞.
#[inline]
pub fn cdf(z: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        0.0
    } else if z == f64::INFINITY {
        1.0
    } else {
        0.5 * erfc(-z * FRAC_1_SQRT_2)
    }
}

/// 1 − Φ(z) without cancellation.
#[inline]
pub fn sf(z: f64) -> f64 {
    cdf(-z)
}

/// P(lo < Z ≤ hi) for Z ~ N(0,1), using whichever tail keeps precision.
pub fn interval(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        sf(lo) - sf(hi)
    } else {
        cdf(hi) - cdf(lo)
    }
}

/// z·φ(z), taken as 0 at ±∞.
#[inline]
pub fn z_pdf(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        z * pdf(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((cdf(0.0) - 0.5).abs() < 1e-15);
        let c = cdf(1.959_963_984_540_054);
        assert!((c - 0.975).abs() < 1e-12, "{c}");
        assert_eq!(cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(cdf(f64::INFINITY), 1.0);
        assert_eq!(pdf(f64::INFINITY), 0.0);
    }

    #[test]
    fn far_tail_interval_keeps_precision() {
        let p = interval(8.0, f64::INFINITY);
        assert!((p - 6.220_960_574_271_785e-16).abs() / p < 1e-10);
        let q = interval(f64::NEG_INFINITY, -8.0);
        assert_eq!(p, q);
    }
}
