use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::select::{replicate_key, selection_outcomes};
use super::{CellSummary, Experiment, ExperimentPlan, ExperimentSummary, Method, Outcome};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CommonLocation, CommonLocationSpec, Dataset};
use crate::rng::Stream;

/// Generalised least squares mean wᵀX̄ with w = Σ⁻¹1 / 1ᵀΣ⁻¹1.
pub fn gls_mean(data: &Dataset, cov: &DMatrix<f64>) -> Result<f64> {
    let d = data.d();
    let ones = DVector::from_element(d, 1.0);
    let a = linalg::solve(cov, &ones).ok_or(Error::Singular("covariance"))?;
    let means = DVector::from_vec(data.column_means());
    Ok(a.dot(&means) / a.sum())
}

/// GLS mean with the sample covariance; `None` when d ≥ n.
pub fn sample_covariance_mean(data: &Dataset) -> Option<Result<f64>> {
    let (n, d) = (data.n(), data.d());
    if d >= n {
        return None;
    }
    let means = data.column_means();
    let mut s = DMatrix::zeros(d, d);
    for i in 0..n {
        let row = data.row(i);
        for a in 0..d {
            for b in 0..d {
                s[(a, b)] += (row[a] - means[a]) * (row[b] - means[b]);
            }
        }
    }
    s /= (n - 1) as f64;
    Some(gls_mean(data, &s))
}

fn replicate(plan: &ExperimentPlan, spec: &CommonLocationSpec, cell_idx: usize, r: usize, seed: u64) -> Vec<Outcome> {
    let cell = plan.cells()[cell_idx];
    let methods = plan.methods();
    let key = replicate_key(cell_idx, r);
    let data = match crate::model::common_location::simulate_with(
        spec,
        cell.n,
        &mut crate::rng::stream(seed, key, Stream::Data),
    ) {
        Ok(d) => d,
        Err(e) => return vec![Outcome::failed(e.to_string()); methods.len()],
    };
    let fam = CommonLocation::new(cell.d);
    let mut out = selection_outcomes(&fam, &data, plan, &cell, seed, key, &methods);
    for (j, m) in methods.iter().enumerate() {
        if out[j].is_some() {
            continue;
        }
        out[j] = Some(match m {
            Method::NoSelection => {
                let means = data.column_means();
                Outcome::ok(means.iter().sum::<f64>() / cell.d as f64, Some(cell.d))
            }
            Method::MleKnown => match gls_mean(&data, &spec.covariance()) {
                Ok(v) => Outcome::ok(v, None),
                Err(e) => Outcome::failed(e.to_string()),
            },
            Method::MleUnknown => match sample_covariance_mean(&data) {
                Some(Ok(v)) => Outcome::ok(v, None),
                Some(Err(e)) => Outcome::failed(e.to_string()),
                None => Outcome::failed("sample covariance unavailable when d >= n"),
            },
            _ => Outcome::failed("method not run"),
        });
    }
    out.into_iter().map(|o| o.expect("every method filled")).collect()
}

/// Common-location experiment: per cell and method, Var and Bias² of μ̂
/// over the replicates, and the mean number of selected components.
pub fn run_table1(plan: &ExperimentPlan, seed: u64) -> Result<ExperimentSummary> {
    if plan.experiment != Experiment::Table1 {
        return Err(Error::InvalidConfig("plan is not a table1 plan".into()));
    }
    plan.validate()?;
    let methods = plan.methods();
    let mut cells = Vec::new();
    for (ci, cell) in plan.cells().into_iter().enumerate() {
        let spec = CommonLocationSpec::new(cell.d, cell.d_star, cell.rho, plan.mu)?;
        log::info!("table1 cell n={} d={} d*={} rho={}", cell.n, cell.d, cell.d_star, cell.rho);
        let outcomes: Vec<Vec<Outcome>> = (0..plan.replicates)
            .into_par_iter()
            .map(|r| replicate(plan, &spec, ci, r, seed))
            .collect();
        cells.push(CellSummary::new(cell, plan.mu, &methods, &outcomes));
    }
    Ok(ExperimentSummary {
        experiment: Experiment::Table1,
        replicates: plan.replicates,
        cells,
    })
}
