//! Sub-likelihood families and their data simulators.
//!
//! A family enumerates M components (marginal or pairwise events) that share
//! a common parameter θ ∈ R^p, and evaluates per-observation scores
//! U_m^{(i)}(θ) together with the matching per-observation information
//! −∂U_m^{(i)}/∂θ.

pub(crate) mod common_location;
mod dataset;
pub(crate) mod exchangeable;
pub mod mvn;
pub mod normal;
pub(crate) mod ordinal;

pub use common_location::{common_location_scores, simulate_common_location, CommonLocation, CommonLocationSpec};
pub use dataset::{Dataset, GROUP_COLUMN};
pub use exchangeable::{
    exchangeable_pair_score, simulate_exchangeable, ExchangeablePairs, ExchangeableSpec, PairScore,
};
pub use ordinal::{
    ordinal_component_loglik, ordinal_probit_scores, simulate_ordinal, thresholds_from_controls,
    OrdinalProbit, OrdinalProbitJoint, OrdinalProbitSpec,
};

use serde::Serialize;

use crate::error::Result;
use crate::mask::ComponentMask;

/// The event a component index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    /// One-wise marginal of variable `k` (0-based).
    Variable(usize),
    /// Pairwise marginal of variables `(l, m)`, `l < m`.
    Pair(usize, usize),
}

/// Per-observation, per-component score vectors evaluated at `theta_at`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTensor {
    n: usize,
    m: usize,
    p: usize,
    values: Vec<f64>,
    theta_at: Vec<f64>,
}

impl ScoreTensor {
    pub fn zeros(n: usize, m: usize, p: usize, theta_at: Vec<f64>) -> Self {
        ScoreTensor {
            n,
            m,
            p,
            values: vec![0.0; n * m * p],
            theta_at,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n, self.m, self.p)
    }

    pub fn theta_at(&self) -> &[f64] {
        &self.theta_at
    }

    /// U_m^{(i)}(θ) as a p-slice.
    pub fn get(&self, i: usize, m: usize) -> &[f64] {
        let off = (i * self.m + m) * self.p;
        &self.values[off..off + self.p]
    }

    pub fn get_mut(&mut self, i: usize, m: usize) -> &mut [f64] {
        let off = (i * self.m + m) * self.p;
        &mut self.values[off..off + self.p]
    }

    /// Σ_i Σ_m ω_m U_m^{(i)}.
    pub fn aggregate(&self, mask: &ComponentMask) -> Vec<f64> {
        let mut acc = vec![0.0; self.p];
        for i in 0..self.n {
            for m in mask.active() {
                for (a, u) in acc.iter_mut().zip(self.get(i, m)) {
                    *a += u;
                }
            }
        }
        acc
    }
}

/// A collection of M sub-likelihood components sharing the parameter θ.
///
/// Implementations must be pure: evaluation may happen concurrently from
/// several chains.
pub trait SubLikelihoodFamily: Send + Sync {
    fn name(&self) -> &'static str;

    /// M.
    fn n_components(&self) -> usize;

    /// p.
    fn n_params(&self) -> usize;

    fn component(&self, m: usize) -> Component;

    /// Checks the dataset shape and contents against the family.
    fn validate(&self, data: &Dataset) -> Result<()>;

    /// Rejects θ outside the admissible domain.
    fn check_theta(&self, theta: &[f64]) -> Result<()>;

    /// Writes U_m^{(i)}(θ) into `out` (length p).
    fn score(&self, theta: &[f64], data: &Dataset, m: usize, i: usize, out: &mut [f64]) -> Result<()>;

    /// Writes −∂U_m^{(i)}/∂θ into `out` (p×p, row-major).
    fn information(&self, theta: &[f64], data: &Dataset, m: usize, i: usize, out: &mut [f64]) -> Result<()>;

    /// Starting value for Newton iterations; must depend only on data and mask.
    fn initial_theta(&self, data: &Dataset, mask: &ComponentMask) -> Vec<f64>;

    /// Closed-form McLE when one exists.
    fn closed_form(&self, _data: &Dataset, _mask: &ComponentMask) -> Option<Vec<f64>> {
        None
    }

    /// Scores for every observation and component.
    fn score_tensor(&self, theta: &[f64], data: &Dataset) -> Result<ScoreTensor> {
        self.check_theta(theta)?;
        let mut t = ScoreTensor::zeros(data.n(), self.n_components(), self.n_params(), theta.to_vec());
        for i in 0..data.n() {
            for m in 0..self.n_components() {
                self.score(theta, data, m, i, t.get_mut(i, m))?;
            }
        }
        Ok(t)
    }
}
