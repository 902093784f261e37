//! Gibbs sampling over component masks and the selection rules applied to
//! the resulting chain.

mod cache;
mod chain;
mod diagnostics;
mod selection;

pub use cache::{CacheStats, ObjectiveCache};
pub(crate) use chain::fmt_f64;
pub use chain::{conditional_probability, gibbs_sweep, initial_mask, run_chain, ChainTrace};
pub use diagnostics::{control_chart, ControlChart};
pub use selection::{
    select_min, select_min_visited, select_threshold, selection_report, SelectedModel, SelectionReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::ComponentMask;

/// Sweeps whose masks feed the component frequencies ω̄_m.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrequencyWindow {
    /// Sweeps N+1..T.
    #[default]
    PostBurnIn,
    /// Sweeps 1..T.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Temperature τ of π_τ(ω) ∝ exp{−τ ĝ(ω)}.
    pub tau: f64,
    /// Number of full sweeps T.
    pub sweeps: usize,
    /// Active components in a random starting mask.
    pub init_active: usize,
    /// Explicit starting mask; overrides `init_active`.
    pub init_mask: Option<ComponentMask>,
    /// Threshold ξ for the frequency rule.
    pub xi: f64,
    /// Burn-in length N, also the control-chart reference window.
    pub burn_in: usize,
    /// Control-chart constant b.
    pub b: f64,
    pub window: FrequencyWindow,
    /// Bound on cached objective values; unbounded when absent.
    pub cache_capacity: Option<usize>,
}

impl SamplerConfig {
    /// τ = d, T = 10d, five random active components, ξ = 0.7, N = ⌊T/2⌋,
    /// b = √10, where d is the number of variables.
    pub fn defaults_for(d: usize) -> Self {
        let sweeps = 10 * d;
        SamplerConfig {
            tau: d as f64,
            sweeps,
            init_active: 5,
            init_mask: None,
            xi: 0.7,
            burn_in: sweeps / 2,
            b: 10f64.sqrt(),
            window: FrequencyWindow::PostBurnIn,
            cache_capacity: None,
        }
    }

    /// Sets T and resets N to ⌊T/2⌋.
    pub fn with_sweeps(mut self, sweeps: usize) -> Self {
        self.sweeps = sweeps;
        self.burn_in = sweeps / 2;
        self
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::domain("tau", self.tau, "(0, ∞)"));
        }
        if self.sweeps < 2 {
            return Err(Error::InvalidConfig(format!("sweeps = {} must be at least 2", self.sweeps)));
        }
        if !(self.xi > 0.5 && self.xi < 1.0) {
            return Err(Error::domain("xi", self.xi, "(0.5, 1)"));
        }
        if self.burn_in == 0 || self.burn_in >= self.sweeps {
            return Err(Error::InvalidConfig(format!(
                "burn_in = {} must satisfy 1 ≤ N < T = {}",
                self.burn_in, self.sweeps
            )));
        }
        if !(self.b > 1.0) || !self.b.is_finite() {
            return Err(Error::domain("b", self.b, "(1, ∞)"));
        }
        if m == 0 {
            return Err(Error::InvalidConfig("family has no components".into()));
        }
        if let Some(mask) = &self.init_mask {
            if mask.len() != m {
                return Err(Error::LengthMismatch {
                    left: mask.len(),
                    right: m,
                });
            }
        } else if self.init_active == 0 {
            return Err(Error::InvalidConfig("init_active must be at least 1".into()));
        }
        if self.cache_capacity == Some(0) {
            return Err(Error::InvalidConfig("cache_capacity must be positive".into()));
        }
        Ok(())
    }
}
