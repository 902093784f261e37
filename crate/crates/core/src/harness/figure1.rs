use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::select::replicate_key;
use super::{location_oracle_mask, location_structural_optimum, Experiment, ExperimentPlan};
use crate::error::{Error, Result};
use crate::estimator::{g0_common_location, JackknifeObjective, Objective, Penalty};
use crate::mask::ComponentMask;
use crate::model::common_location::simulate_with;
use crate::model::{CommonLocation, CommonLocationSpec};
use crate::rng::{stream, Stream};
use crate::sampler::{control_chart, fmt_f64, run_chain, select_threshold, ChainTrace};
use crate::stability::pcer_threshold;

/// Plot-ready series of one stability-selection run.
#[derive(Debug, Clone, Serialize)]
pub struct Figure1Series {
    /// ĝ_λ(ω^{(t)}) per sweep.
    pub objective: Vec<f64>,
    pub control_limit: Option<f64>,
    /// Final ω̄_m per component.
    pub frequencies: Vec<f64>,
    /// Stable set computed from sweeps 1..t.
    pub stable_sizes: Vec<usize>,
    /// ĝ_λ at the progressive stable set (+∞ when it is empty).
    pub stable_objective: Vec<f64>,
    /// Hamming distance from the progressive stable set to the oracle mask.
    pub hamming: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Figure1Run {
    pub final_mask: ComponentMask,
    pub final_hamming: usize,
    /// Exact variance objective of the final mask, NaN when it is empty.
    pub g0: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Figure1Output {
    pub n: usize,
    pub d: usize,
    pub d_star: usize,
    pub rho: f64,
    pub oracle: ComponentMask,
    pub oracle_g0: f64,
    pub runs: Vec<Figure1Run>,
    /// Series of the first run.
    #[serde(skip)]
    pub series: Figure1Series,
}

impl Figure1Output {
    /// Runs whose final Hamming distance is at most `k`.
    pub fn share_within(&self, k: usize) -> f64 {
        self.runs.iter().filter(|r| r.final_hamming <= k).count() as f64 / self.runs.len() as f64
    }

    /// Runs whose final g₀ is within `tol` (relative) of the oracle value.
    pub fn share_g0_within(&self, tol: f64) -> f64 {
        let ok = self
            .runs
            .iter()
            .filter(|r| (r.g0 - self.oracle_g0).abs() <= tol * self.oracle_g0.abs())
            .count();
        ok as f64 / self.runs.len() as f64
    }

    /// Writes (a) objective, (b) frequencies, (c) stable objective and (d)
    /// Hamming series as four CSV files.
    pub fn write_series<W: Write>(&self, a: W, b: W, c: W, d: W) -> Result<()> {
        let s = &self.series;
        let mut w = csv::Writer::from_writer(a);
        w.write_record(["sweep", "g_lambda", "control_limit"])?;
        for (t, v) in s.objective.iter().enumerate() {
            w.write_record([(t + 1).to_string(), fmt_f64(*v), s.control_limit.map_or("NA".into(), fmt_f64)])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["component", "frequency", "correlated"])?;
        for (m, f) in s.frequencies.iter().enumerate() {
            w.write_record([(m + 1).to_string(), fmt_f64(*f), (m < self.d_star).to_string()])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_writer(c);
        w.write_record(["sweep", "stable_size", "g_lambda_stable"])?;
        for (t, (k, v)) in s.stable_sizes.iter().zip(&s.stable_objective).enumerate() {
            w.write_record([(t + 1).to_string(), k.to_string(), fmt_f64(*v)])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_writer(d);
        w.write_record(["sweep", "hamming"])?;
        for (t, h) in s.hamming.iter().enumerate() {
            w.write_record([(t + 1).to_string(), h.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Stable sets from sweeps 1..t for every t: η̂ over all t sweeps and
/// frequencies over those after the burn-in (all of them while t ≤ N).
fn progressive_stable(trace: &ChainTrace, alpha: f64) -> Vec<ComponentMask> {
    let m = trace.n_components();
    let mut all_counts = vec![0usize; m];
    let mut post_counts = vec![0usize; m];
    let mut size_sum = 0usize;
    let mut out = Vec::with_capacity(trace.len());
    for (t, mask) in trace.masks.iter().enumerate() {
        size_sum += mask.count();
        for k in mask.active() {
            all_counts[k] += 1;
            if t >= trace.burn_in {
                post_counts[k] += 1;
            }
        }
        let len = t + 1;
        let eta = size_sum as f64 / len as f64;
        let xi = pcer_threshold(eta, m, alpha);
        let freqs: Vec<f64> = if len > trace.burn_in {
            post_counts.iter().map(|&c| c as f64 / (len - trace.burn_in) as f64).collect()
        } else {
            all_counts.iter().map(|&c| c as f64 / len as f64).collect()
        };
        out.push(select_threshold(&freqs, xi));
    }
    out
}

fn one_run(plan: &ExperimentPlan, spec: &CommonLocationSpec, oracle: &ComponentMask, r: usize, seed: u64) -> Result<(Figure1Run, Figure1Series)> {
    let cell = plan.cells()[0];
    let key = replicate_key(0, r);
    let data = simulate_with(spec, cell.n, &mut stream(seed, key, Stream::Data))?;
    let fam = CommonLocation::new(cell.d);
    let st = plan.stability();
    let scfg = plan.sampler_for(&cell);
    let pen = Penalty::new(st.lambda, st.penalty_scale)?;
    let obj = JackknifeObjective::new(&fam, &data, plan.estimator(), pen, &mut stream(seed, key, Stream::Groups))?;
    let tr = run_chain(&obj, &scfg, &mut stream(seed, key, Stream::StabilityChain))?;
    let stable = progressive_stable(&tr, st.alpha);
    let mut memo: HashMap<ComponentMask, f64> = HashMap::new();
    let mut stable_objective = Vec::with_capacity(stable.len());
    let mut hamming = Vec::with_capacity(stable.len());
    for s in &stable {
        let v = match memo.get(s) {
            Some(v) => *v,
            None => {
                let v = obj.evaluate(s).map_or(f64::INFINITY, |o| o.total);
                memo.insert(s.clone(), v);
                v
            }
        };
        stable_objective.push(v);
        hamming.push(s.hamming(oracle)?);
    }
    let last = stable.last().cloned().ok_or(Error::NoValidState)?;
    let g0 = g0_common_location(&last, cell.rho, cell.d_star).unwrap_or(f64::NAN);
    let totals = tr.totals();
    let series = Figure1Series {
        control_limit: control_chart(&totals, scfg.b, scfg.burn_in).map(|c| c.limit),
        objective: totals,
        frequencies: tr.frequencies(scfg.window),
        stable_sizes: stable.iter().map(ComponentMask::count).collect(),
        stable_objective,
        hamming,
    };
    let run = Figure1Run {
        final_hamming: *series.hamming.last().unwrap_or(&usize::MAX),
        final_mask: last,
        g0,
    };
    Ok((run, series))
}

/// Stability selection on the common-location model with diagnostics
/// against the oracle mask (all uncorrelated components plus the optimal
/// number of correlated ones). Uses the first cell of the plan; each
/// replicate is an independent dataset and chain.
pub fn run_figure1(plan: &ExperimentPlan, seed: u64) -> Result<Figure1Output> {
    if plan.experiment != Experiment::Figure1 {
        return Err(Error::InvalidConfig("plan is not a figure1 plan".into()));
    }
    plan.validate()?;
    let cell = plan.cells()[0];
    let spec = CommonLocationSpec::new(cell.d, cell.d_star, cell.rho, plan.mu)?;
    let (u, c, g_opt) = location_structural_optimum(cell.d, cell.d_star, cell.rho);
    let oracle = location_oracle_mask(cell.d, cell.d_star, u, c);
    let results: Vec<Result<(Figure1Run, Figure1Series)>> = (0..plan.replicates)
        .into_par_iter()
        .map(|r| one_run(plan, &spec, &oracle, r, seed))
        .collect();
    let mut runs = Vec::with_capacity(results.len());
    let mut first = None;
    for res in results {
        let (run, series) = res?;
        runs.push(run);
        first.get_or_insert(series);
    }
    Ok(Figure1Output {
        n: cell.n,
        d: cell.d,
        d_star: cell.d_star,
        rho: cell.rho,
        oracle,
        oracle_g0: g_opt,
        runs,
        series: first.ok_or(Error::NoValidState)?,
    })
}
