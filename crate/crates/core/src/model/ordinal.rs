//! Latent-Gaussian ordinal model for three-category variables with a binary
//! group covariate x: Z_k ~ N(θx, 1) and Y_k = 0, 1, 2 as Z_k falls below
//! γ_k1, between the thresholds, or above γ_k2.
//!
//! [`OrdinalProbit`] treats the thresholds as known and estimates θ alone.
//! [`OrdinalProbitJoint`] estimates (θ, γ) together (p = 1 + 2d); it is only
//! identifiable when every component is active.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use super::normal;
use super::{mvn, Component, Dataset, ScoreTensor, SubLikelihoodFamily};
use crate::error::{Error, Result};
use crate::mask::ComponentMask;
use crate::rng::{self, Stream};

/// Interval probabilities below this are treated as underflow.
const MIN_PROB: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalProbitSpec {
    pub d: usize,
    pub theta: f64,
    /// (γ_k1, γ_k2) per variable; ±∞ allowed as open ends.
    pub thresholds: Vec<(f64, f64)>,
    pub case_fraction: f64,
}

impl OrdinalProbitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidConfig("d must be at least 1".into()));
        }
        if self.thresholds.len() != self.d {
            return Err(Error::InvalidConfig(format!(
                "{} threshold pairs given for d = {}",
                self.thresholds.len(),
                self.d
            )));
        }
        check_thresholds(&self.thresholds)?;
        if !self.theta.is_finite() {
            return Err(Error::domain("theta", self.theta, "finite reals"));
        }
        if !(0.0..=1.0).contains(&self.case_fraction) {
            return Err(Error::domain("case_fraction", self.case_fraction, "[0, 1]"));
        }
        Ok(())
    }

    /// P(Y_k = y | x) for the three categories.
    pub fn category_probs(&self, k: usize, x: f64) -> [f64; 3] {
        let (g1, g2) = self.thresholds[k];
        let shift = self.theta * x;
        [
            normal::interval(f64::NEG_INFINITY, g1 - shift),
            normal::interval(g1 - shift, g2 - shift),
            normal::interval(g2 - shift, f64::INFINITY),
        ]
    }
}

fn check_thresholds(th: &[(f64, f64)]) -> Result<()> {
    for (k, &(a, b)) in th.iter().enumerate() {
        if a.is_nan() || b.is_nan() || !(a < b) || a == f64::INFINITY || b == f64::NEG_INFINITY {
            return Err(Error::InvalidConfig(format!(
                "thresholds for variable {} must satisfy gamma1 < gamma2, got ({a}, {b})",
                k + 1
            )));
        }
    }
    Ok(())
}

fn check_latent(r: &DMatrix<f64>, d: usize) -> Result<()> {
    if r.nrows() != d || r.ncols() != d {
        return Err(Error::InvalidConfig(format!(
            "latent correlation must be {d}×{d}, got {}×{}",
            r.nrows(),
            r.ncols()
        )));
    }
    for k in 0..d {
        if r[(k, k)] != 1.0 {
            return Err(Error::InvalidConfig("latent correlation needs a unit diagonal".into()));
        }
        for j in 0..k {
            if r[(k, j)] != r[(j, k)] {
                return Err(Error::InvalidConfig("latent correlation must be symmetric".into()));
            }
        }
    }
    Ok(())
}

#[inline]
fn category(z: f64, (g1, g2): (f64, f64)) -> u8 {
    if z <= g1 {
        0
    } else if z <= g2 {
        1
    } else {
        2
    }
}

/// Latent Z ~ N_d(θx·1, R) thresholded per variable. The first
/// round(case_fraction · n) rows are cases.
pub fn simulate_ordinal(spec: &OrdinalProbitSpec, n: usize, seed: u64, latent: &DMatrix<f64>) -> Result<Dataset> {
    simulate_with(spec, n, latent, &mut rng::stream(seed, 0, Stream::Data))
}

pub(crate) fn simulate_with<R: Rng + ?Sized>(
    spec: &OrdinalProbitSpec,
    n: usize,
    latent: &DMatrix<f64>,
    rng: &mut R,
) -> Result<Dataset> {
    spec.validate()?;
    check_latent(latent, spec.d)?;
    let chol = mvn::cholesky_factor(latent)?;
    let n_cases = (spec.case_fraction * n as f64).round() as usize;
    let group: Vec<u8> = (0..n).map(|i| u8::from(i < n_cases)).collect();
    let zero = vec![0.0; spec.d];
    let z = mvn::sample_rows(&zero, &chol, n, rng);
    let mut values = Vec::with_capacity(n * spec.d);
    for i in 0..n {
        let shift = spec.theta * group[i] as f64;
        for k in 0..spec.d {
            values.push(category(z[i * spec.d + k] + shift, spec.thresholds[k]) as f64);
        }
    }
    Dataset::new(values, n, spec.d, Some(group))
}

#[inline]
fn bounds(y: f64, (g1, g2): (f64, f64)) -> (f64, f64) {
    if y == 0.0 {
        (f64::NEG_INFINITY, g1)
    } else if y == 1.0 {
        (g1, g2)
    } else {
        (g2, f64::INFINITY)
    }
}

fn covariate(data: &Dataset, i: usize) -> f64 {
    data.group().map_or(0.0, |g| g[i] as f64)
}

fn interval_prob(a: f64, b: f64, k: usize, i: usize) -> Result<f64> {
    let p = normal::interval(a, b);
    if !(p >= MIN_PROB) {
        return Err(Error::NumericalDomain(format!(
            "category probability {p:e} underflows for variable {}, observation {}",
            k + 1,
            i + 1
        )));
    }
    Ok(p)
}

/// Σ_i log P(Y_k^{(i)} = y | x^{(i)}) for one variable at θ.
pub fn ordinal_component_loglik(theta: f64, thresholds: &[(f64, f64)], data: &Dataset, k: usize) -> Result<f64> {
    let mut s = 0.0;
    for i in 0..data.n() {
        let x = covariate(data, i);
        let (lo, hi) = bounds(data.get(i, k), thresholds[k]);
        s += interval_prob(lo - theta * x, hi - theta * x, k, i)?.ln();
    }
    Ok(s)
}

/// Scalar θ-scores for every observation and variable.
pub fn ordinal_probit_scores(theta: f64, spec: &OrdinalProbitSpec, data: &Dataset) -> Result<ScoreTensor> {
    let fam = OrdinalProbit::new(spec.thresholds.clone())?;
    fam.validate(data)?;
    fam.score_tensor(&[theta], data)
}

/// Φ⁻¹ with p in (0, 1).
fn probit(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

fn thresholds_from_rows(data: &Dataset, rows: impl Iterator<Item = usize> + Clone) -> Vec<(f64, f64)> {
    (0..data.d())
        .map(|k| {
            let (mut c0, mut c1, mut tot) = (0.0, 0.0, 0.0);
            for i in rows.clone() {
                match data.get(i, k) as u8 {
                    0 => c0 += 1.0,
                    1 => c1 += 1.0,
                    _ => {}
                }
                tot += 1.0;
            }
            // add-half smoothing keeps both thresholds finite and ordered
            let p0 = (c0 + 0.5) / (tot + 1.5);
            let p01 = (c0 + c1 + 1.0) / (tot + 1.5);
            (probit(p0), probit(p01))
        })
        .collect()
}

/// Plug-in thresholds from the controls' marginal category frequencies,
/// where the latent mean does not depend on θ.
pub fn thresholds_from_controls(data: &Dataset) -> Result<Vec<(f64, f64)>> {
    data.check_ordinal()?;
    let g = data
        .group()
        .ok_or_else(|| Error::InvalidData("ordinal model needs a `group` column".into()))?;
    let controls: Vec<usize> = (0..data.n()).filter(|&i| g[i] == 0).collect();
    if controls.is_empty() {
        return Err(Error::InvalidData("no control rows to estimate thresholds from".into()));
    }
    Ok(thresholds_from_rows(data, controls.into_iter()))
}

fn validate_ordinal_data(d: usize, data: &Dataset) -> Result<()> {
    if data.d() != d {
        return Err(Error::InvalidData(format!(
            "ordinal family expects {d} columns, dataset has {}",
            data.d()
        )));
    }
    if data.group().is_none() {
        return Err(Error::InvalidData("ordinal model needs a `group` column".into()));
    }
    data.check_ordinal()
}

/// One-wise family for the group effect θ with thresholds held fixed.
#[derive(Debug, Clone)]
pub struct OrdinalProbit {
    thresholds: Vec<(f64, f64)>,
}

impl OrdinalProbit {
    pub fn new(thresholds: Vec<(f64, f64)>) -> Result<Self> {
        check_thresholds(&thresholds)?;
        Ok(OrdinalProbit { thresholds })
    }

    pub fn thresholds(&self) -> &[(f64, f64)] {
        &self.thresholds
    }
}

impl SubLikelihoodFamily for OrdinalProbit {
    fn name(&self) -> &'static str {
        "ordinal"
    }

    fn n_components(&self) -> usize {
        self.thresholds.len()
    }

    fn n_params(&self) -> usize {
        1
    }

    fn component(&self, m: usize) -> Component {
        Component::Variable(m)
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        validate_ordinal_data(self.thresholds.len(), data)
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if !theta[0].is_finite() {
            return Err(Error::domain("theta", theta[0], "finite reals"));
        }
        Ok(())
    }

    fn score(&self, theta: &[f64], data: &Dataset, m: usize, i: usize, out: &mut [f64]) -> Result<()> {
        let x = covariate(data, i);
        if x == 0.0 {
            out[0] = 0.0;
            return Ok(());
        }
        let (lo, hi) = bounds(data.get(i, m), self.thresholds[m]);
        let (a, b) = (lo - theta[0] * x, hi - theta[0] * x);
        let p = interval_prob(a, b, m, i)?;
        out[0] = x * (normal::pdf(a) - normal::pdf(b)) / p;
        Ok(())
    }

    fn information(&self, theta: &[f64], data: &Dataset, m: usize, i: usize, out: &mut [f64]) -> Result<()> {
        let x = covariate(data, i);
        if x == 0.0 {
            out[0] = 0.0;
            return Ok(());
        }
        let (lo, hi) = bounds(data.get(i, m), self.thresholds[m]);
        let (a, b) = (lo - theta[0] * x, hi - theta[0] * x);
        let p = interval_prob(a, b, m, i)?;
        let u = x * (normal::pdf(a) - normal::pdf(b)) / p;
        let p2 = x * x * (normal::z_pdf(a) - normal::z_pdf(b));
        out[0] = u * u - p2 / p;
        Ok(())
    }

    fn initial_theta(&self, _data: &Dataset, _mask: &ComponentMask) -> Vec<f64> {
        vec![0.0]
    }
}

/// Joint (θ, γ_11, γ_12, …, γ_d1, γ_d2) family.
#[derive(Debug, Clone)]
pub struct OrdinalProbitJoint {
    d: usize,
}

impl OrdinalProbitJoint {
    pub fn new(d: usize) -> Self {
        OrdinalProbitJoint { d }
    }

    /// (lo, hi) parameter slots for category `y` of variable `k`; `None` marks
    /// an infinite, fixed end.
    fn slots(k: usize, y: f64) -> (Option<usize>, Option<usize>) {
        let (g1, g2) = (1 + 2 * k, 2 + 2 * k);
        if y == 0.0 {
            (None, Some(g1))
        } else if y == 1.0 {
            (Some(g1), Some(g2))
        } else {
            (Some(g2), None)
        }
    }

    /// ∇P/P and ∇²P/P restricted to (θ, lo, hi).
    fn local(&self, theta: &[f64], data: &Dataset, m: usize, i: usize) -> Result<([f64; 3], [[f64; 3]; 3], (Option<usize>, Option<usize>))> {
        let x = covariate(data, i);
        let (slo, shi) = Self::slots(m, data.get(i, m));
        let lo = slo.map_or(f64::NEG_INFINITY, |s| theta[s]);
        let hi = shi.map_or(f64::INFINITY, |s| theta[s]);
        let (a, b) = (lo - theta[0] * x, hi - theta[0] * x);
        let p = interval_prob(a, b, m, i)?;
        let (fa, fb) = (normal::pdf(a), normal::pdf(b));
        let (zfa, zfb) = (normal::z_pdf(a), normal::z_pdf(b));
        let g = [x * (fa - fb) / p, -fa / p, fb / p];
        let h = [
            [x * x * (zfa - zfb) / p, -x * zfa / p, x * zfb / p],
            [-x * zfa / p, zfa / p, 0.0],
            [x * zfb / p, 0.0, -zfb / p],
        ];
        Ok((g, h, (slo, shi)))
    }
}

impl SubLikelihoodFamily for OrdinalProbitJoint {
    fn name(&self) -> &'static str {
        "ordinal-joint"
    }

    fn n_components(&self) -> usize {
        self.d
    }

    fn n_params(&self) -> usize {
        1 + 2 * self.d
    }

    fn component(&self, m: usize) -> Component {
        Component::Variable(m)
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        validate_ordinal_data(self.d, data)
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::LengthMismatch {
                left: theta.len(),
                right: self.n_params(),
            });
        }
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalDomain("non-finite parameter".into()));
        }
        let th: Vec<(f64, f64)> = (0..self.d).map(|k| (theta[1 + 2 * k], theta[2 + 2 * k])).collect();
        check_thresholds(&th)
    }

    fn score(&self, theta: &[f64], data: &Dataset, m: usize, i: usize, out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        let (g, _, (slo, shi)) = self.local(theta, data, m, i)?;
        out[0] = g[0];
        if let Some(s) = slo {
            out[s] = g[1];
        }
        if let Some(s) = shi {
            out[s] = g[2];
        }
        Ok(())
    }

    fn information(&self, theta: &[f64], data: &Dataset, m: usize, i: usize, out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        let p = self.n_params();
        let (g, h, (slo, shi)) = self.local(theta, data, m, i)?;
        let idx = [Some(0), slo, shi];
        for r in 0..3 {
            for c in 0..3 {
                if let (Some(pr), Some(pc)) = (idx[r], idx[c]) {
                    out[pr * p + pc] += g[r] * g[c] - h[r][c];
                }
            }
        }
        Ok(())
    }

    fn initial_theta(&self, data: &Dataset, _mask: &ComponentMask) -> Vec<f64> {
        let mut t = vec![0.0];
        for (a, b) in thresholds_from_rows(data, 0..data.n()) {
            t.push(a);
            t.push(b);
        }
        t
    }
}
