//! Zero-mean normal vector with exchangeable correlation,
//! Σ(ρ) = (1 − ρ)I + ρ11ᵀ, estimated from pairwise sub-likelihoods.
//!
//! The pairwise score used here is the cubic
//! U_lm(ρ) = (1 + ρ²)SS_lm − ρ(SS_ll + SS_mm) + nρ(1 − ρ²),
//! i.e. the pairwise log-likelihood derivative multiplied by (1 − ρ²)².

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{mvn, Component, Dataset, SubLikelihoodFamily};
use crate::error::{Error, Result};
use crate::mask::ComponentMask;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExchangeableSpec {
    pub d: usize,
    pub rho: f64,
}

impl ExchangeableSpec {
    pub fn new(d: usize, rho: f64) -> Result<Self> {
        let s = ExchangeableSpec { d, rho };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidConfig(format!(
                "exchangeable model needs d >= 2, got {}",
                self.d
            )));
        }
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(Error::domain("rho", self.rho, "[0, 1)"));
        }
        Ok(())
    }

    pub fn covariance(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.d, self.d, |r, c| if r == c { 1.0 } else { self.rho })
    }
}

pub fn simulate_exchangeable(spec: &ExchangeableSpec, n: usize, seed: u64) -> Result<Dataset> {
    simulate_with(spec, n, &mut rng::stream(seed, 0, Stream::Data))
}

pub(crate) fn simulate_with<R: Rng + ?Sized>(spec: &ExchangeableSpec, n: usize, rng: &mut R) -> Result<Dataset> {
    spec.validate()?;
    let chol = mvn::cholesky_factor(&spec.covariance())?;
    Dataset::new(mvn::sample_rows(&vec![0.0; spec.d], &chol, n, rng), n, spec.d, None)
}

/// Pair score summed over observations, plus the per-observation terms.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScore {
    pub aggregate: f64,
    pub per_observation: Vec<f64>,
}

#[inline]
fn pair_term(rho: f64, xl: f64, xm: f64) -> f64 {
    (1.0 + rho * rho) * xl * xm - rho * (xl * xl + xm * xm) + rho * (1.0 - rho * rho)
}

/// Per-observation cubic score for the pair `(l, m)`.
pub fn exchangeable_pair_score(rho: f64, data: &Dataset, l: usize, m: usize) -> Result<PairScore> {
    check_rho(rho)?;
    if l >= data.d() || m >= data.d() || l == m {
        return Err(Error::InvalidConfig(format!(
            "pair ({l}, {m}) invalid for {} variables",
            data.d()
        )));
    }
    let per_observation: Vec<f64> = (0..data.n())
        .map(|i| pair_term(rho, data.get(i, l), data.get(i, m)))
        .collect();
    Ok(PairScore {
        aggregate: per_observation.iter().sum(),
        per_observation,
    })
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho.abs() < 1.0) {
        return Err(Error::domain("rho", rho, "(-1, 1)"));
    }
    Ok(())
}

/// All d(d−1)/2 pairs in lexicographic order, p = 1.
#[derive(Debug, Clone)]
pub struct ExchangeablePairs {
    d: usize,
    pairs: Vec<(usize, usize)>,
}

impl ExchangeablePairs {
    pub fn new(d: usize) -> Self {
        let pairs = (0..d)
            .flat_map(|l| (l + 1..d).map(move |m| (l, m)))
            .collect();
        ExchangeablePairs { d, pairs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

impl SubLikelihoodFamily for ExchangeablePairs {
    fn name(&self) -> &'static str {
        "exchangeable"
    }

    fn n_components(&self) -> usize {
        self.pairs.len()
    }

    fn n_params(&self) -> usize {
        1
    }

    fn component(&self, m: usize) -> Component {
        let (a, b) = self.pairs[m];
        Component::Pair(a, b)
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        if data.d() != self.d {
            return Err(Error::InvalidData(format!(
                "exchangeable family expects {} columns, dataset has {}",
                self.d,
                data.d()
            )));
        }
        Ok(())
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        check_rho(theta[0])
    }

    #[inline]
    fn score(&self, theta: &[f64], data: &Dataset, m: usize, i: usize, out: &mut [f64]) -> Result<()> {
        let (l, k) = self.pairs[m];
        out[0] = pair_term(theta[0], data.get(i, l), data.get(i, k));
        Ok(())
    }

    #[inline]
    fn information(&self, theta: &[f64], data: &Dataset, m: usize, i: usize, out: &mut [f64]) -> Result<()> {
        let (l, k) = self.pairs[m];
        let (r, xl, xm) = (theta[0], data.get(i, l), data.get(i, k));
        out[0] = -(2.0 * r * xl * xm - (xl * xl + xm * xm) + 1.0 - 3.0 * r * r);
        Ok(())
    }

    /// Moment start 2·Σ SS_lm / Σ (SS_ll + SS_mm) over the active pairs.
    fn initial_theta(&self, data: &Dataset, mask: &ComponentMask) -> Vec<f64> {
        let (mut a, mut b) = (0.0, 0.0);
        for m in mask.active() {
            let (l, k) = self.pairs[m];
            for i in 0..data.n() {
                let (x, y) = (data.get(i, l), data.get(i, k));
                a += x * y;
                b += x * x + y * y;
            }
        }
        let r = if b > 0.0 { 2.0 * a / b } else { 0.0 };
        vec![r.clamp(-0.95, 0.95)]
    }
}
