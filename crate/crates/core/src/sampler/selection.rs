use serde::Serialize;

use super::{control_chart, ChainTrace, ControlChart, FrequencyWindow, SamplerConfig};
use crate::error::{Error, Result};
use crate::estimator::{JackknifeObjective, Objective, ObjectiveValue};
use crate::mask::ComponentMask;

/// Earliest end-of-sweep mask attaining the smallest recorded objective.
pub fn select_min(trace: &ChainTrace) -> Result<(ComponentMask, ObjectiveValue)> {
    argmin(trace.masks.iter().zip(&trace.objectives))
}

/// Smallest objective over every state evaluated during the run, first
/// evaluation wins ties.
pub fn select_min_visited(trace: &ChainTrace) -> Result<(ComponentMask, ObjectiveValue)> {
    argmin(trace.evaluated.iter().map(|(m, v)| (m, v)))
}

fn argmin<'a>(it: impl Iterator<Item = (&'a ComponentMask, &'a ObjectiveValue)>) -> Result<(ComponentMask, ObjectiveValue)> {
    let mut best: Option<(&ComponentMask, &ObjectiveValue)> = None;
    for (m, v) in it {
        if v.total.is_finite() && best.is_none_or(|(_, b)| v.total < b.total) {
            best = Some((m, v));
        }
    }
    best.map(|(m, v)| (m.clone(), *v)).ok_or(Error::NoValidState)
}

/// Bit m set iff ω̄_m ≥ ξ.
pub fn select_threshold(frequencies: &[f64], xi: f64) -> ComponentMask {
    let bits: Vec<bool> = frequencies.iter().map(|&f| f >= xi).collect();
    ComponentMask::from_bools(&bits)
}

/// A chosen mask with its estimate, when one can be computed.
#[derive(Debug, Clone, Serialize)]
pub struct SelectedModel {
    pub mask: ComponentMask,
    pub size: usize,
    pub theta: Option<Vec<f64>>,
    pub objective: Option<ObjectiveValue>,
    pub warning: Option<String>,
}

impl SelectedModel {
    pub fn estimate(objective: &JackknifeObjective<'_>, mask: ComponentMask) -> Self {
        let size = mask.count();
        if mask.is_degenerate() {
            return SelectedModel {
                mask,
                size,
                theta: None,
                objective: None,
                warning: Some("no component passed the threshold; estimation refused".into()),
            };
        }
        let (theta, mut warning) = match objective.theta_hat(&mask) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let value = match objective.evaluate(&mask) {
            Ok(v) => Some(v),
            Err(e) => {
                warning.get_or_insert(e.to_string());
                None
            }
        };
        SelectedModel {
            mask,
            size,
            theta,
            objective: value,
            warning,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionReport {
    /// Argmin over all evaluated states.
    pub min_rule: SelectedModel,
    /// Argmin over end-of-sweep states only.
    pub min_rule_sweeps: ComponentMask,
    /// Evaluated states within 1e−12 of the minimum, in evaluation order.
    pub min_ties: Vec<ComponentMask>,
    pub threshold_rule: SelectedModel,
    pub xi: f64,
    pub window: FrequencyWindow,
    pub frequencies: Vec<f64>,
    pub control_chart: Option<ControlChart>,
}

/// Min and threshold rules on a chain run against `objective`.
pub fn selection_report(trace: &ChainTrace, objective: &JackknifeObjective<'_>, cfg: &SamplerConfig) -> Result<SelectionReport> {
    let (best, best_value) = select_min_visited(trace)?;
    let (sweep_best, _) = select_min(trace)?;
    let mut min_ties: Vec<ComponentMask> = Vec::new();
    for (m, v) in &trace.evaluated {
        if (v.total - best_value.total).abs() <= 1e-12 && !min_ties.contains(m) {
            min_ties.push(m.clone());
        }
    }
    let frequencies = trace.frequencies(cfg.window);
    let thr = select_threshold(&frequencies, cfg.xi);
    Ok(SelectionReport {
        min_rule: SelectedModel::estimate(objective, best),
        min_rule_sweeps: sweep_best,
        min_ties,
        threshold_rule: SelectedModel::estimate(objective, thr),
        xi: cfg.xi,
        window: cfg.window,
        frequencies,
        control_chart: control_chart(&trace.totals(), cfg.b, cfg.burn_in),
    })
}
