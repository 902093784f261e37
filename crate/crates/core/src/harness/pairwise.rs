use rayon::prelude::*;

use super::select::{replicate_key, selection_outcomes};
use super::{CellSummary, Experiment, ExperimentPlan, ExperimentSummary, Method, Outcome};
use crate::error::{Error, Result};
use crate::estimator::solve_mcle;
use crate::mask::ComponentMask;
use crate::model::exchangeable::simulate_with;
use crate::model::{ExchangeablePairs, ExchangeableSpec, SubLikelihoodFamily};
use crate::rng::{stream, Stream};

fn replicate(plan: &ExperimentPlan, spec: &ExchangeableSpec, cell_idx: usize, r: usize, seed: u64) -> Vec<Outcome> {
    let cell = plan.cells()[cell_idx];
    let methods = plan.methods();
    let key = replicate_key(cell_idx, r);
    let data = match simulate_with(spec, cell.n, &mut stream(seed, key, Stream::Data)) {
        Ok(d) => d,
        Err(e) => return vec![Outcome::failed(e.to_string()); methods.len()],
    };
    let fam = ExchangeablePairs::new(cell.d);
    let mut out = selection_outcomes(&fam, &data, plan, &cell, seed, key, &methods);
    for (j, m) in methods.iter().enumerate() {
        if out[j].is_none() && *m == Method::NoSelection {
            let all = ComponentMask::ones(fam.n_components());
            let init = fam.initial_theta(&data, &all);
            out[j] = Some(match solve_mcle(&fam, &data, &all, &init, &plan.estimator()) {
                Ok(t) => Outcome::ok(t[0], Some(fam.n_components())),
                Err(e) => Outcome::failed(e.to_string()),
            });
        }
    }
    out.into_iter()
        .map(|o| o.unwrap_or_else(|| Outcome::failed("method not available for this model")))
        .collect()
}

/// Exchangeable-correlation experiment: relative efficiency of each
/// selection rule against the all-pairs estimator and the mean number of
/// selected pairs.
pub fn run_table3(plan: &ExperimentPlan, seed: u64) -> Result<ExperimentSummary> {
    if plan.experiment != Experiment::Table3 {
        return Err(Error::InvalidConfig("plan is not a table3 plan".into()));
    }
    plan.validate()?;
    let methods = plan.methods();
    let mut cells = Vec::new();
    for (ci, cell) in plan.cells().into_iter().enumerate() {
        let spec = ExchangeableSpec::new(cell.d, cell.rho)?;
        log::info!("table3 cell n={} d={} rho={}", cell.n, cell.d, cell.rho);
        let outcomes: Vec<Vec<Outcome>> = (0..plan.replicates)
            .into_par_iter()
            .map(|r| replicate(plan, &spec, ci, r, seed))
            .collect();
        cells.push(CellSummary::new(cell, cell.rho, &methods, &outcomes));
    }
    Ok(ExperimentSummary {
        experiment: Experiment::Table3,
        replicates: plan.replicates,
        cells,
    })
}
