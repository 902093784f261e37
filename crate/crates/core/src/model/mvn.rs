//! Multivariate normal draws by Cholesky factorisation.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Lower Cholesky factor of `cov`, rejecting matrices that are not positive
/// definite.
pub fn cholesky_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cov.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or(Error::Singular("covariance matrix is not positive definite"))
}

/// `n` draws from N(mean, L Lᵀ), returned row-major (n × d).
pub fn sample_rows<R: Rng + ?Sized>(mean: &[f64], chol: &DMatrix<f64>, n: usize, rng: &mut R) -> Vec<f64> {
    let d = mean.len();
    let mut out = Vec::with_capacity(n * d);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        for zk in z.iter_mut() {
            *zk = rng.sample(StandardNormal);
        }
        for r in 0..d {
            let mut v = mean[r];
            for c in 0..=r {
                v += chol[(r, c)] * z[c];
            }
            out.push(v);
        }
    }
    out
}
