use std::io::Write;

use serde::Serialize;

use super::{Cell, Experiment, Method};
use crate::error::Result;

/// Result of one method on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub estimate: Option<f64>,
    pub size: Option<usize>,
    pub error: Option<String>,
}

impl Outcome {
    pub fn ok(estimate: f64, size: Option<usize>) -> Self {
        Outcome {
            estimate: Some(estimate),
            size,
            error: None,
        }
    }

    pub fn failed(error: impl Into<String>) -> Self {
        Outcome {
            estimate: None,
            size: None,
            error: Some(error.into()),
        }
    }
}

/// Replicate-level statistics for one method in one cell. Standard errors
/// are `None` when fewer than two replicates succeeded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub replicates: usize,
    pub failures: usize,
    /// False when more than 5% of replicates failed.
    pub valid: bool,
    pub mean: Option<f64>,
    pub var: Option<f64>,
    pub var_se: Option<f64>,
    pub bias2: Option<f64>,
    pub bias2_se: Option<f64>,
    pub mean_size: Option<f64>,
    pub mean_size_se: Option<f64>,
    /// Var(no-selection) / Var(this method).
    pub re: Option<f64>,
    pub re_se: Option<f64>,
}

impl MethodSummary {
    pub fn from_outcomes(method: Method, outcomes: &[Outcome], truth: f64) -> Self {
        let xs: Vec<f64> = outcomes.iter().filter_map(|o| o.estimate).collect();
        let sizes: Vec<f64> = outcomes.iter().filter_map(|o| o.size.map(|s| s as f64)).collect();
        let failures = outcomes.len() - xs.len();
        let k = xs.len();
        let mean = (k > 0).then(|| xs.iter().sum::<f64>() / k as f64);
        let (mut var, mut var_se, mut bias2, mut bias2_se) = (None, None, None, None);
        if let Some(m) = mean {
            bias2 = Some((m - truth).powi(2));
            if k >= 2 {
                let kf = k as f64;
                let s2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (kf - 1.0);
                let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / kf;
                var = Some(s2);
                var_se = Some(((m4 - s2 * s2).max(0.0) / kf).sqrt());
                bias2_se = Some(2.0 * (m - truth).abs() * (s2 / kf).sqrt());
            }
        }
        let (mean_size, mean_size_se) = mean_and_se(&sizes);
        MethodSummary {
            method,
            replicates: outcomes.len(),
            failures,
            valid: failures as f64 <= 0.05 * outcomes.len() as f64,
            mean,
            var,
            var_se,
            bias2,
            bias2_se,
            mean_size,
            mean_size_se,
            re: None,
            re_se: None,
        }
    }
}

fn mean_and_se(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let k = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / k;
    let se = (xs.len() >= 2).then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt());
    (Some(m), se)
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub truth: f64,
    pub methods: Vec<MethodSummary>,
}

impl CellSummary {
    pub fn new(cell: Cell, truth: f64, methods: &[Method], outcomes: &[Vec<Outcome>]) -> Self {
        let mut summaries: Vec<MethodSummary> = methods
            .iter()
            .enumerate()
            .map(|(j, &m)| {
                let col: Vec<Outcome> = outcomes.iter().map(|r| r[j].clone()).collect();
                MethodSummary::from_outcomes(m, &col, truth)
            })
            .collect();
        // relative efficiency against no selection, delta-method error
        let base = summaries
            .iter()
            .find(|s| s.method == Method::NoSelection)
            .and_then(|s| s.var.map(|v| (v, s.var_se)));
        if let Some((vb, vb_se)) = base {
            for s in &mut summaries {
                if let Some(v) = s.var.filter(|v| *v > 0.0) {
                    let re = vb / v;
                    s.re = Some(re);
                    s.re_se = match (vb_se, s.var_se) {
                        (Some(a), Some(b)) => Some(re * ((a / vb).powi(2) + (b / v).powi(2)).sqrt()),
                        _ => None,
                    };
                }
            }
        }
        CellSummary {
            cell,
            truth,
            methods: summaries,
        }
    }

    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub experiment: Experiment,
    pub replicates: usize,
    pub cells: Vec<CellSummary>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

impl ExperimentSummary {
    /// One row per cell × method; unavailable values are written as NA.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "experiment", "n", "d", "d_star", "rho", "method", "replicates", "failures", "valid", "mean", "var",
            "var_se", "bias2", "bias2_se", "mean_size", "mean_size_se", "re", "re_se",
        ])?;
        let exp = serde_json::to_value(self.experiment)?;
        let exp = exp.as_str().unwrap_or_default().to_string();
        for c in &self.cells {
            for s in &c.methods {
                out.write_record([
                    exp.clone(),
                    c.cell.n.to_string(),
                    c.cell.d.to_string(),
                    c.cell.d_star.to_string(),
                    format!("{}", c.cell.rho),
                    s.method.name().to_string(),
                    s.replicates.to_string(),
                    s.failures.to_string(),
                    s.valid.to_string(),
                    opt(s.mean),
                    opt(s.var),
                    opt(s.var_se),
                    opt(s.bias2),
                    opt(s.bias2_se),
                    opt(s.mean_size),
                    opt(s.mean_size_se),
                    opt(s.re),
                    opt(s.re_se),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let outs: Vec<Outcome> = [1.0, 2.0, 3.0].iter().map(|&x| Outcome::ok(x, Some(2))).collect();
        let s = MethodSummary::from_outcomes(Method::Cls2, &outs, 1.0);
        assert_eq!(s.var, Some(1.0));
        assert_eq!(s.bias2, Some(1.0));
        assert_eq!(s.mean_size, Some(2.0));
        assert_eq!(s.mean_size_se, Some(0.0));
        assert!(s.valid);
    }

    #[test]
    fn single_replicate_has_no_standard_errors() {
        let s = MethodSummary::from_outcomes(Method::Cls2, &[Outcome::ok(1.0, Some(3))], 0.0);
        assert_eq!((s.var, s.var_se, s.mean_size_se), (None, None, None));
        assert_eq!(s.mean_size, Some(3.0));
    }

    #[test]
    fn failures_invalidate_cell() {
        let mut outs: Vec<Outcome> = (0..18).map(|x| Outcome::ok(x as f64, None)).collect();
        outs.push(Outcome::failed("boom"));
        outs.push(Outcome::failed("boom"));
        let s = MethodSummary::from_outcomes(Method::Cls1Min, &outs, 0.0);
        assert_eq!(s.failures, 2);
        assert!(!s.valid);
    }
}
