//! McLE solving, one-step jackknife pseudo-values and the variance objective.

mod jackknife;
mod newton;
mod objective;
mod sandwich;

pub use jackknife::{g_hat, jackknife_standard_error, one_step_pseudo_values, DeleteGroups, JackknifeSet};
pub use newton::solve_mcle;
pub use objective::{
    g0_common_location, g_hat_penalized, jackknife_se_for, FnObjective, JackknifeObjective, Objective, ObjectiveValue, Penalty,
    PenaltyScale,
};
pub use sandwich::{sandwich_variance, SandwichEstimate};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::ComponentMask;
use crate::model::{Dataset, SubLikelihoodFamily};

/// Matrix used inside the one-step jackknife update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerMatrix {
    /// Σ ω_m Σ_j −∂U_m^{(j)}/∂θ; makes the update exact for linear scores.
    #[default]
    Observed,
    /// Σ ω_m Σ_j U_m^{(j)} U_m^{(j)ᵀ}.
    OuterProduct,
}

/// Where the one-step expansion point θ̃ comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pilot {
    /// θ̃ = θ̂(ω), solved for every mask.
    #[default]
    PerMask,
    /// θ̃ = θ̂(1), solved once with all components and shared across masks.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Newton stops once max_k |Σ_i Σ_m ω_m U_mk^{(i)}| / n falls to this.
    pub root_tol: f64,
    pub max_iter: usize,
    /// Observations deleted per jackknife group.
    pub delete_k: usize,
    pub pilot: Pilot,
    pub inner: InnerMatrix,
    /// ε added to the scatter diagonal before the log-determinant.
    pub ridge: f64,
    /// Relative pivot floor below which a scatter counts as singular.
    pub singular_tol: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            root_tol: 1e-10,
            max_iter: 100,
            delete_k: 1,
            pilot: Pilot::PerMask,
            inner: InnerMatrix::Observed,
            ridge: 0.0,
            singular_tol: 1e-12,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.root_tol > 0.0) {
            return Err(Error::domain("root_tol", self.root_tol, "(0, ∞)"));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.delete_k == 0 || self.delete_k >= n {
            return Err(Error::InvalidConfig(format!(
                "delete_k = {} must satisfy 1 ≤ k < n = {n}",
                self.delete_k
            )));
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return Err(Error::domain("ridge", self.ridge, "[0, ∞)"));
        }
        if !(self.singular_tol >= 0.0) {
            return Err(Error::domain("singular_tol", self.singular_tol, "[0, ∞)"));
        }
        Ok(())
    }
}

/// Per-observation masked scores s_i = Σ_m ω_m U_m^{(i)} (n×p) and inner
/// matrices (n×p×p) at θ.
pub(crate) struct ObservationTerms {
    pub p: usize,
    pub scores: Vec<f64>,
    pub inner: Vec<f64>,
}

pub(crate) fn observation_terms(
    family: &dyn SubLikelihoodFamily,
    data: &Dataset,
    mask: &ComponentMask,
    theta: &[f64],
    kind: InnerMatrix,
) -> Result<ObservationTerms> {
    let p = family.n_params();
    let n = data.n();
    let mut scores = vec![0.0; n * p];
    let mut inner = vec![0.0; n * p * p];
    let mut u = vec![0.0; p];
    let mut h = vec![0.0; p * p];
    for i in 0..n {
        let s = &mut scores[i * p..(i + 1) * p];
        let j = &mut inner[i * p * p..(i + 1) * p * p];
        for m in mask.active() {
            family.score(theta, data, m, i, &mut u)?;
            for (a, b) in s.iter_mut().zip(&u) {
                *a += b;
            }
            match kind {
                InnerMatrix::Observed => {
                    family.information(theta, data, m, i, &mut h)?;
                    for (a, b) in j.iter_mut().zip(&h) {
                        *a += b;
                    }
                }
                InnerMatrix::OuterProduct => {
                    for r in 0..p {
                        for c in 0..p {
                            j[r * p + c] += u[r] * u[c];
                        }
                    }
                }
            }
        }
    }
    Ok(ObservationTerms { p, scores, inner })
}
