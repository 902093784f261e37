use super::{Cell, ExperimentPlan, Method, Outcome};
use crate::estimator::{JackknifeObjective, Penalty};
use crate::model::{Dataset, SubLikelihoodFamily};
use crate::rng::{stream, Stream};
use crate::sampler::{run_chain, selection_report, SelectedModel};
use crate::stability::stability_select;

/// Stream key of replicate `r` in cell `c`.
pub(crate) fn replicate_key(c: usize, r: usize) -> u64 {
    ((c as u64) << 32) | r as u64
}

fn outcome(sel: &SelectedModel) -> Outcome {
    match (&sel.theta, &sel.warning) {
        (Some(t), _) => Outcome::ok(t[0], Some(sel.size)),
        (None, w) => Outcome::failed(w.clone().unwrap_or_else(|| "no estimate".into())),
    }
}

/// Outcomes of the chain-based methods requested in `methods`; other entries
/// are left as `None`.
pub(crate) fn selection_outcomes(
    family: &dyn SubLikelihoodFamily,
    data: &Dataset,
    plan: &ExperimentPlan,
    cell: &Cell,
    seed: u64,
    key: u64,
    methods: &[Method],
) -> Vec<Option<Outcome>> {
    let mut out = vec![None; methods.len()];
    let wants = |m: Method| methods.contains(&m);
    let scfg = plan.sampler_for(cell);
    let ecfg = plan.estimator();
    let put = |out: &mut Vec<Option<Outcome>>, m: Method, o: Outcome| {
        if let Some(j) = methods.iter().position(|&x| x == m) {
            out[j] = Some(o);
        }
    };
    if wants(Method::Cls1Min) || wants(Method::Cls1Threshold) {
        let res = JackknifeObjective::new(family, data, ecfg.clone(), Penalty::none(), &mut stream(seed, key, Stream::Groups))
            .and_then(|obj| {
                let tr = run_chain(&obj, &scfg, &mut stream(seed, key, Stream::Chain))?;
                selection_report(&tr, &obj, &scfg)
            });
        match res {
            Ok(r) => {
                put(&mut out, Method::Cls1Min, outcome(&r.min_rule));
                put(&mut out, Method::Cls1Threshold, outcome(&r.threshold_rule));
            }
            Err(e) => {
                put(&mut out, Method::Cls1Min, Outcome::failed(e.to_string()));
                put(&mut out, Method::Cls1Threshold, Outcome::failed(e.to_string()));
            }
        }
    }
    if wants(Method::Cls2) {
        let st = plan.stability();
        let res = Penalty::new(st.lambda, st.penalty_scale)
            .and_then(|pen| JackknifeObjective::new(family, data, ecfg.clone(), pen, &mut stream(seed, key, Stream::Groups)))
            .and_then(|obj| {
                let tr = run_chain(&obj, &scfg, &mut stream(seed, key, Stream::StabilityChain))?;
                stability_select(&tr, &obj, &st, scfg.window, None)
            });
        put(
            &mut out,
            Method::Cls2,
            match res {
                Ok(r) => outcome(&r.stable),
                Err(e) => Outcome::failed(e.to_string()),
            },
        );
    }
    out
}
