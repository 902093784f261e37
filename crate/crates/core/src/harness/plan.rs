use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, InnerMatrix, PenaltyScale, Pilot};
use crate::sampler::{FrequencyWindow, SamplerConfig};
use crate::stability::StabilityConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Common-location model, estimator variance and bias by method.
    Table1,
    /// Exchangeable pairwise model, relative efficiency against all pairs.
    Table3,
    /// Single-chain stability selection traces on the common-location model.
    Figure1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NoSelection,
    Cls1Min,
    Cls1Threshold,
    Cls2,
    MleKnown,
    MleUnknown,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::NoSelection => "no-selection",
            Method::Cls1Min => "cls1-min",
            Method::Cls1Threshold => "cls1-threshold",
            Method::Cls2 => "cls2",
            Method::MleKnown => "mle-known",
            Method::MleUnknown => "mle-unknown",
        }
    }
}

/// One simulation setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub n: usize,
    pub d: usize,
    /// Size of the correlated block (location model only).
    pub d_star: usize,
    pub rho: f64,
}

/// Flat plan file: grids over n, d and ρ plus optional overrides of the
/// sampler, stability and estimator defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub experiment: Experiment,
    /// Monte Carlo replicates B per cell (independent runs for figure1).
    pub replicates: usize,
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub rho: Vec<f64>,
    /// Correlated block size; defaults to round(d_star_fraction · d).
    pub d_star: Option<usize>,
    #[serde(default = "default_fraction")]
    pub d_star_fraction: f64,
    #[serde(default)]
    pub mu: f64,
    pub methods: Option<Vec<Method>>,
    pub tau: Option<f64>,
    pub sweeps: Option<usize>,
    pub burn_in: Option<usize>,
    pub xi: Option<f64>,
    pub b: Option<f64>,
    pub init_active: Option<usize>,
    pub window: Option<FrequencyWindow>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub penalty_scale: Option<PenaltyScale>,
    pub delete_k: Option<usize>,
    pub inner: Option<InnerMatrix>,
    pub pilot: Option<Pilot>,
}

fn default_fraction() -> f64 {
    0.8
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: ExperimentPlan = toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.n.is_empty() || self.d.is_empty() || self.rho.is_empty() {
            return Err(Error::InvalidConfig("n, d and rho each need at least one value".into()));
        }
        if !(0.0..=1.0).contains(&self.d_star_fraction) {
            return Err(Error::domain("d_star_fraction", self.d_star_fraction, "[0, 1]"));
        }
        if let Some(ms) = &self.methods {
            if self.experiment == Experiment::Table3
                && ms.iter().any(|m| matches!(m, Method::MleKnown | Method::MleUnknown))
            {
                return Err(Error::InvalidConfig("maximum likelihood baselines exist for table1 only".into()));
            }
        }
        for cell in self.cells() {
            self.sampler_for(&cell).validate(self.components(&cell))?;
            self.estimator().validate(cell.n)?;
        }
        self.stability().validate()
    }

    /// Grid n × d × ρ in that nesting order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &d in &self.d {
                for &rho in &self.rho {
                    let d_star = self
                        .d_star
                        .unwrap_or_else(|| (self.d_star_fraction * d as f64).round() as usize);
                    out.push(Cell { n, d, d_star, rho });
                }
            }
        }
        out
    }

    pub fn components(&self, cell: &Cell) -> usize {
        match self.experiment {
            Experiment::Table3 => cell.d * (cell.d - 1) / 2,
            _ => cell.d,
        }
    }

    pub fn methods(&self) -> Vec<Method> {
        self.methods.clone().unwrap_or_else(|| match self.experiment {
            Experiment::Table1 => vec![
                Method::NoSelection,
                Method::Cls1Min,
                Method::Cls1Threshold,
                Method::Cls2,
                Method::MleKnown,
                Method::MleUnknown,
            ],
            _ => vec![Method::NoSelection, Method::Cls1Min, Method::Cls1Threshold, Method::Cls2],
        })
    }

    pub fn sampler_for(&self, cell: &Cell) -> SamplerConfig {
        let mut s = SamplerConfig::defaults_for(cell.d);
        if let Some(t) = self.sweeps {
            s = s.with_sweeps(t);
        }
        if let Some(v) = self.tau {
            s.tau = v;
        }
        if let Some(v) = self.burn_in {
            s.burn_in = v;
        }
        if let Some(v) = self.xi {
            s.xi = v;
        }
        if let Some(v) = self.b {
            s.b = v;
        }
        if let Some(v) = self.init_active {
            s.init_active = v;
        }
        if let Some(v) = self.window {
            s.window = v;
        }
        s
    }

    pub fn stability(&self) -> StabilityConfig {
        let mut s = StabilityConfig::default();
        if let Some(v) = self.alpha {
            s.alpha = v;
        }
        if let Some(v) = self.lambda {
            s.lambda = v;
        }
        if let Some(v) = self.penalty_scale {
            s.penalty_scale = v;
        }
        s
    }

    pub fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig {
            delete_k: self.delete_k.unwrap_or(1),
            inner: self.inner.unwrap_or_default(),
            pilot: self.pilot.unwrap_or_default(),
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_plan() {
        let p = ExperimentPlan::from_toml(
            "experiment = \"table1\"\nreplicates = 3\nn = [25, 100]\nd = [10]\nrho = [0.5, 0.9]\n",
        )
        .unwrap();
        let cells = p.cells();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[0].d_star, 8);
        let s = p.sampler_for(&cells[0]);
        assert_eq!((s.tau, s.sweeps, s.burn_in), (10.0, 100, 50));
        assert_eq!(p.methods().len(), 6);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentPlan::from_toml("experiment = \"table1\"\nreplicates = 3\nn = [5]\nd = [3]\nrho = [0.5]\nbogus = 1\n").is_err());
        assert!(ExperimentPlan::from_toml("experiment = \"table1\"\nreplicates = 0\nn = [5]\nd = [3]\nrho = [0.5]\n").is_err());
        assert!(ExperimentPlan::from_toml("experiment = \"table3\"\nreplicates = 1\nn = [5]\nd = [3]\nrho = [0.5]\nxi = 0.4\n").is_err());
    }
}
