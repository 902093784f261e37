//! Small dense helpers for the p×p systems that appear in estimation.

use nalgebra::{DMatrix, DVector};

/// Log-determinant of a symmetric PSD matrix plus `ridge · I`.
///
/// Returns `None` when the (ridged) matrix is not numerically positive
/// definite: the Cholesky factorisation fails or a squared pivot falls to
/// `tol` times the largest diagonal entry or below.
pub fn log_det_spd(m: &DMatrix<f64>, ridge: f64, tol: f64) -> Option<f64> {
    let p = m.nrows();
    let mut a = m.clone();
    for k in 0..p {
        a[(k, k)] += ridge;
    }
    if a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let scale = (0..p).map(|k| a[(k, k)]).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for k in 0..p {
        let d = l[(k, k)] * l[(k, k)];
        if !(d > tol * scale) {
            return None;
        }
        acc += d.ln();
    }
    Some(acc)
}

/// Solve `a x = b` for a small square system, `None` if `a` is singular.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if a.nrows() == 1 {
        let d = a[(0, 0)];
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        return Some(DVector::from_element(1, b[0] / d));
    }
    let x = a.clone().lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub fn inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = a.clone().try_inverse()?;
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}
