//! Normal observations sharing one location: X ~ N_d(μ1, Σ(ρ)), where the
//! leading `d_star` coordinates are equicorrelated with correlation ρ and the
//! remaining ones are independent. One-wise scores U_m = X_m − μ.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{mvn, Component, Dataset, ScoreTensor, SubLikelihoodFamily};
use crate::error::{Error, Result};
use crate::mask::ComponentMask;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommonLocationSpec {
    pub d: usize,
    pub d_star: usize,
    pub rho: f64,
    pub mu: f64,
}

impl CommonLocationSpec {
    pub fn new(d: usize, d_star: usize, rho: f64, mu: f64) -> Result<Self> {
        let s = CommonLocationSpec { d, d_star, rho, mu };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidConfig("d must be at least 1".into()));
        }
        if self.d_star > self.d {
            return Err(Error::InvalidConfig(format!(
                "d_star = {} exceeds d = {}",
                self.d_star, self.d
            )));
        }
        if !self.mu.is_finite() {
            return Err(Error::domain("mu", self.mu, "finite reals"));
        }
        let lower = if self.d_star >= 2 {
            -1.0 / (self.d_star as f64 - 1.0)
        } else {
            f64::NEG_INFINITY
        };
        if !(self.rho.is_finite() && self.rho > lower && self.rho < 1.0) {
            return Err(Error::domain(
                "rho",
                self.rho,
                format!("({lower}, 1) for d_star = {}", self.d_star),
            ));
        }
        Ok(())
    }

    /// Unit diagonal, ρ inside the leading `d_star` block, 0 elsewhere.
    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |r, c| {
            if r == c {
                1.0
            } else if r < self.d_star && c < self.d_star {
                self.rho
            } else {
                0.0
            }
        })
    }

    /// Components `d_star..d` are mutually uncorrelated with everything.
    pub fn is_correlated(&self, m: usize) -> bool {
        self.d_star >= 2 && m < self.d_star && self.rho != 0.0
    }
}

/// `n` draws using the data stream of `seed`.
pub fn simulate_common_location(spec: &CommonLocationSpec, n: usize, seed: u64) -> Result<Dataset> {
    simulate_with(spec, n, &mut rng::stream(seed, 0, Stream::Data))
}

pub(crate) fn simulate_with<R: Rng + ?Sized>(
    spec: &CommonLocationSpec,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    spec.validate()?;
    let chol = mvn::cholesky_factor(&spec.covariance())?;
    let mean = vec![spec.mu; spec.d];
    Dataset::new(mvn::sample_rows(&mean, &chol, n, rng), n, spec.d, None)
}

/// Tensor with entry (i, m) equal to X_m^{(i)} − θ.
pub fn common_location_scores(theta: f64, data: &Dataset) -> ScoreTensor {
    let mut t = ScoreTensor::zeros(data.n(), data.d(), 1, vec![theta]);
    for i in 0..data.n() {
        for m in 0..data.d() {
            t.get_mut(i, m)[0] = data.get(i, m) - theta;
        }
    }
    t
}

/// One-wise family for the common location μ (M = d, p = 1).
#[derive(Debug, Clone)]
pub struct CommonLocation {
    d: usize,
}

impl CommonLocation {
    pub fn new(d: usize) -> Self {
        CommonLocation { d }
    }
}

impl SubLikelihoodFamily for CommonLocation {
    fn name(&self) -> &'static str {
        "common-location"
    }

    fn n_components(&self) -> usize {
        self.d
    }

    fn n_params(&self) -> usize {
        1
    }

    fn component(&self, m: usize) -> Component {
        Component::Variable(m)
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        if data.d() != self.d {
            return Err(Error::InvalidData(format!(
                "common-location family expects {} columns, dataset has {}",
                self.d,
                data.d()
            )));
        }
        Ok(())
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != 1 || !theta[0].is_finite() {
            return Err(Error::domain("mu", theta.first().copied().unwrap_or(f64::NAN), "finite reals"));
        }
        Ok(())
    }

    #[inline]
    fn score(&self, theta: &[f64], data: &Dataset, m: usize, i: usize, out: &mut [f64]) -> Result<()> {
        out[0] = data.get(i, m) - theta[0];
        Ok(())
    }

    #[inline]
    fn information(&self, _theta: &[f64], _data: &Dataset, _m: usize, _i: usize, out: &mut [f64]) -> Result<()> {
        out[0] = 1.0;
        Ok(())
    }

    fn initial_theta(&self, data: &Dataset, mask: &ComponentMask) -> Vec<f64> {
        self.closed_form(data, mask).unwrap_or_else(|| vec![0.0])
    }

    /// μ̂ = Σ ω_m X̄_m / Σ ω_m.
    fn closed_form(&self, data: &Dataset, mask: &ComponentMask) -> Option<Vec<f64>> {
        let k = mask.count();
        if k == 0 {
            return None;
        }
        let means = data.column_means();
        let s: f64 = mask.active().map(|m| means[m]).sum();
        Some(vec![s / k as f64])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(data: &Dataset, a: usize, b: usize) -> f64 {
        let m = data.column_means();
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for i in 0..data.n() {
            let x = data.get(i, a) - m[a];
            let y = data.get(i, b) - m[b];
            sab += x * y;
            saa += x * x;
            sbb += y * y;
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn independent_case_has_identity_covariance() {
        let spec = CommonLocationSpec::new(5, 0, 0.0, 0.0).unwrap();
        let data = simulate_common_location(&spec, 100_000, 11).unwrap();
        let m = data.column_means();
        for a in 0..5 {
            for b in 0..5 {
                let mut s = 0.0;
                for i in 0..data.n() {
                    s += (data.get(i, a) - m[a]) * (data.get(i, b) - m[b]);
                }
                let c = s / (data.n() - 1) as f64;
                if a == b {
                    assert!((c - 1.0).abs() < 0.02, "var {a}: {c}");
                } else {
                    assert!(c.abs() < 0.02, "cov {a},{b}: {c}");
                }
            }
        }
    }

    #[test]
    fn block_correlation_structure() {
        let spec = CommonLocationSpec::new(10, 8, 0.9, 1.0).unwrap();
        let data = simulate_common_location(&spec, 100_000, 5).unwrap();
        assert!((corr(&data, 0, 1) - 0.9).abs() < 0.02);
        assert!(corr(&data, 0, 8).abs() < 0.02);
    }

    #[test]
    fn simulation_is_deterministic() {
        let spec = CommonLocationSpec::new(4, 2, 0.5, 0.0).unwrap();
        let a = simulate_common_location(&spec, 50, 3).unwrap();
        let b = simulate_common_location(&spec, 50, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_common_location(&spec, 50, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_non_pd_specs() {
        assert!(CommonLocationSpec::new(5, 4, 1.0, 0.0).is_err());
        assert!(CommonLocationSpec::new(5, 4, -1.0 / 3.0, 0.0).is_err());
        assert!(CommonLocationSpec::new(5, 4, -0.3, 0.0).is_ok());
        assert!(CommonLocationSpec::new(5, 6, 0.3, 0.0).is_err());
    }

    #[test]
    fn score_examples() {
        let data = Dataset::new(vec![2.0, 0.0, 4.0, 1.0], 2, 2, None).unwrap();
        let t = common_location_scores(2.0, &data);
        assert_eq!(t.get(0, 0)[0], 0.0);
        let t1 = common_location_scores(1.0, &data);
        assert_eq!(t1.get(0, 1)[0], -1.0);
        // column mean of scores equals X̄_m − θ
        let means = data.column_means();
        for m in 0..2 {
            let s: f64 = (0..2).map(|i| t1.get(i, m)[0]).sum::<f64>() / 2.0;
            assert!((s - (means[m] - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn mean_score_is_zero_at_truth() {
        let spec = CommonLocationSpec::new(3, 2, 0.5, 1.5).unwrap();
        let n = 100_000;
        let data = simulate_common_location(&spec, n, 9).unwrap();
        let t = common_location_scores(1.5, &data);
        for m in 0..3 {
            let s: f64 = (0..n).map(|i| t.get(i, m)[0]).sum::<f64>() / n as f64;
            // unit variance, so 3 standard errors is 3/sqrt(n)
            assert!(s.abs() < 3.0 / (n as f64).sqrt(), "component {m}: {s}");
        }
    }
}
