use std::io::Write;

use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use super::{CacheStats, FrequencyWindow, ObjectiveCache, SamplerConfig};
use crate::error::{Error, Result};
use crate::estimator::{Objective, ObjectiveValue};
use crate::mask::ComponentMask;

/// P(ω_m = 1 | ω_{−m}) = 1 / (1 + exp{τ(g1 − g0)}), where g0 and g1 are the
/// objectives with ω_m = 0 and ω_m = 1.
///
/// The smaller of the two probabilities is formed as e/(1+e) with
/// e = exp(−τ|g1 − g0|) and the other as its complement, so swapping the
/// arguments gives exactly one minus the result.
pub fn conditional_probability(g0: f64, g1: f64, tau: f64) -> Result<f64> {
    match (g0 == f64::INFINITY, g1 == f64::INFINITY) {
        (true, true) => return Err(Error::DegenerateState),
        (false, true) => return Ok(0.0),
        (true, false) => return Ok(1.0),
        _ => {}
    }
    let d = tau * (g1 - g0);
    if d.is_nan() {
        return Err(Error::NumericalDomain(format!("objective difference is NaN ({g0}, {g1})")));
    }
    let e = (-d.abs()).exp();
    let small = e / (1.0 + e);
    Ok(if d > 0.0 { small } else { 1.0 - small })
}

/// One systematic-scan sweep: coordinates m = 1..M are redrawn in order,
/// each from its Bernoulli conditional given the freshest other bits. Draws
/// exactly M uniforms from `rng`.
pub fn gibbs_sweep<F, R>(mask: &ComponentMask, mut objective: F, tau: f64, rng: &mut R) -> Result<ComponentMask>
where
    F: FnMut(&ComponentMask) -> ObjectiveValue,
    R: Rng + ?Sized,
{
    let mut w = mask.clone();
    for m in 0..w.len() {
        let g0 = objective(&w.with(m, false)).total;
        let g1 = objective(&w.with(m, true)).total;
        let p = conditional_probability(g0, g1, tau)?;
        let u: f64 = rng.random();
        w.set(m, u < p);
    }
    Ok(w)
}

/// Random mask with min(k, M) active components.
pub fn initial_mask<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> ComponentMask {
    let picks = index::sample(rng, m, k.min(m)).into_vec();
    ComponentMask::from_indices(m, &picks)
}

/// End-of-sweep states of a Gibbs run together with every evaluated state.
#[derive(Debug, Clone, Serialize)]
pub struct ChainTrace {
    pub initial: ComponentMask,
    /// ω^{(t)}, t = 1..T.
    pub masks: Vec<ComponentMask>,
    pub objectives: Vec<ObjectiveValue>,
    /// Each cache miss in evaluation order.
    #[serde(skip)]
    pub evaluated: Vec<(ComponentMask, ObjectiveValue)>,
    pub burn_in: usize,
    pub cache: CacheStats,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn n_components(&self) -> usize {
        self.initial.len()
    }

    fn window_range(&self, window: FrequencyWindow) -> std::ops::Range<usize> {
        match window {
            FrequencyWindow::PostBurnIn => self.burn_in.min(self.len())..self.len(),
            FrequencyWindow::All => 0..self.len(),
        }
    }

    /// Row sums of Ŵ over the window.
    pub fn visit_counts(&self, window: FrequencyWindow) -> Vec<usize> {
        let mut c = vec![0; self.n_components()];
        for mask in &self.masks[self.window_range(window)] {
            for m in mask.active() {
                c[m] += 1;
            }
        }
        c
    }

    /// ω̄_m over the window.
    pub fn frequencies(&self, window: FrequencyWindow) -> Vec<f64> {
        let len = self.window_range(window).len().max(1) as f64;
        self.visit_counts(window).into_iter().map(|c| c as f64 / len).collect()
    }

    /// Mean number of active components over the window.
    pub fn mean_size(&self, window: FrequencyWindow) -> f64 {
        let r = self.window_range(window);
        let len = r.len().max(1) as f64;
        self.masks[r].iter().map(|m| m.count() as f64).sum::<f64>() / len
    }

    pub fn totals(&self) -> Vec<f64> {
        self.objectives.iter().map(|o| o.total).collect()
    }

    /// One row per sweep: index, mask, ĝ, ĝ_λ and the running frequency of
    /// every component.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let m = self.n_components();
        let mut header = vec!["sweep".to_string(), "mask".into(), "g".into(), "g_lambda".into()];
        header.extend((1..=m).map(|k| format!("freq_{k}")));
        out.write_record(&header)?;
        let mut counts = vec![0usize; m];
        for (t, (mask, obj)) in self.masks.iter().zip(&self.objectives).enumerate() {
            for k in mask.active() {
                counts[k] += 1;
            }
            let mut row = vec![(t + 1).to_string(), mask.bitstring(), fmt_f64(obj.g), fmt_f64(obj.total)];
            row.extend(counts.iter().map(|&c| fmt_f64(c as f64 / (t + 1) as f64)));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

/// Runs T sweeps of the Gibbs sampler against `objective`.
pub fn run_chain<R: Rng + ?Sized>(objective: &dyn Objective, cfg: &SamplerConfig, rng: &mut R) -> Result<ChainTrace> {
    let m = objective.n_components();
    cfg.validate(m)?;
    let initial = match &cfg.init_mask {
        Some(mask) => mask.clone(),
        None => initial_mask(m, cfg.init_active, rng),
    };
    let mut cache = ObjectiveCache::new(objective, cfg.cache_capacity);
    let mut w = initial.clone();
    let mut masks = Vec::with_capacity(cfg.sweeps);
    let mut objectives = Vec::with_capacity(cfg.sweeps);
    for _ in 0..cfg.sweeps {
        w = gibbs_sweep(&w, |x| cache.get(x), cfg.tau, rng)?;
        objectives.push(cache.get(&w));
        masks.push(w.clone());
    }
    let (stats, evaluated) = cache.into_parts();
    if stats.failures > 0 {
        log::warn!(
            "{} objective evaluations failed and were scored +inf (first: {})",
            stats.failures,
            stats.first_failure.as_deref().unwrap_or("")
        );
    }
    Ok(ChainTrace {
        initial,
        masks,
        objectives,
        evaluated,
        burn_in: cfg.burn_in,
        cache: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::FnObjective;
    use crate::rng::{stream, Stream};
    use proptest::prelude::{prop_assert_eq, proptest};

    #[test]
    fn probability_examples() {
        assert_eq!(conditional_probability(1.3, 1.3, 2.0).unwrap(), 0.5);
        let p = conditional_probability(3f64.ln(), 0.0, 1.0).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
        assert_eq!(conditional_probability(0.0, f64::INFINITY, 1.0).unwrap(), 0.0);
        assert_eq!(conditional_probability(f64::INFINITY, 0.0, 1.0).unwrap(), 1.0);
        assert!(matches!(
            conditional_probability(f64::INFINITY, f64::INFINITY, 1.0),
            Err(Error::DegenerateState)
        ));
        // far beyond exp overflow
        assert_eq!(conditional_probability(0.0, 1e6, 1e6).unwrap(), 0.0);
        assert_eq!(conditional_probability(1e6, 0.0, 1e6).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn swapped_arguments_sum_to_one(g0 in -50.0f64..50.0, g1 in -50.0f64..50.0, tau in 0.01f64..100.0) {
            let a = conditional_probability(g0, g1, tau).unwrap();
            let b = conditional_probability(g1, g0, tau).unwrap();
            prop_assert_eq!(a + b, 1.0);
        }
    }

    #[test]
    fn cold_chain_moves_to_lower_objective() {
        // two masks of M = 1 differing in the single bit
        let mut rng = stream(1, 0, Stream::Chain);
        let start = ComponentMask::zeros(1);
        let mut hits = 0;
        for _ in 0..10_000 {
            let w = gibbs_sweep(
                &start,
                |m| ObjectiveValue::unpenalized(if m.get(0) { 0.0 } else { 0.01 }),
                1e4,
                &mut rng,
            )
            .unwrap();
            hits += usize::from(w.get(0));
        }
        assert!(hits as f64 / 1e4 > 0.999);
    }

    #[test]
    fn symmetric_single_bit_is_fair() {
        let mut rng = stream(2, 0, Stream::Chain);
        let mut w = ComponentMask::zeros(1);
        let mut on = 0;
        for _ in 0..10_000 {
            w = gibbs_sweep(&w, |_| ObjectiveValue::unpenalized(1.0), 1.0, &mut rng).unwrap();
            on += usize::from(w.get(0));
        }
        assert!((on as f64 / 1e4 - 0.5).abs() < 0.02);
    }

    #[test]
    fn sweep_is_deterministic_and_draws_m_uniforms() {
        let obj = |m: &ComponentMask| ObjectiveValue::unpenalized((m.count() as f64 - 2.0).powi(2));
        let start = ComponentMask::from_indices(6, &[1]);
        let mut r1 = stream(9, 0, Stream::Chain);
        let mut r2 = stream(9, 0, Stream::Chain);
        let a = gibbs_sweep(&start, obj, 1.0, &mut r1).unwrap();
        let b = gibbs_sweep(&start, obj, 1.0, &mut r2).unwrap();
        assert_eq!(a, b);
        let mut r3 = stream(9, 0, Stream::Chain);
        for _ in 0..6 {
            let _: f64 = r3.random();
        }
        assert_eq!(r1.random::<u64>(), r3.random::<u64>());
    }

    fn toy() -> FnObjective<impl Fn(&ComponentMask) -> f64 + Sync> {
        FnObjective::new(4, |m: &ComponentMask| {
            let c = m.active().map(|k| k as f64 + 1.0).sum::<f64>();
            (c - 4.5).abs() * 0.3
        })
    }

    fn cfg() -> SamplerConfig {
        SamplerConfig {
            tau: 2.0,
            ..SamplerConfig::defaults_for(4).with_sweeps(200)
        }
    }

    #[test]
    fn shifted_objective_gives_identical_chain() {
        let base = toy();
        let shifted = FnObjective::new(4, |m: &ComponentMask| {
            let c = m.active().map(|k| k as f64 + 1.0).sum::<f64>();
            (c - 4.5).abs() * 0.3 + 3.0
        });
        let a = run_chain(&base, &cfg(), &mut stream(4, 0, Stream::Chain)).unwrap();
        let b = run_chain(&shifted, &cfg(), &mut stream(4, 0, Stream::Chain)).unwrap();
        assert_eq!(a.masks, b.masks);
    }

    #[test]
    fn trace_is_coherent_and_cached() {
        let obj = toy();
        let tr = run_chain(&obj, &cfg(), &mut stream(5, 0, Stream::Chain)).unwrap();
        assert_eq!(tr.len(), 200);
        assert!(tr.cache.hits > 0);
        for t in [0, 17, 50, 123, 199] {
            assert_eq!(tr.objectives[t], obj.evaluate(&tr.masks[t]).unwrap());
        }
        let again = run_chain(&obj, &cfg(), &mut stream(5, 0, Stream::Chain)).unwrap();
        assert_eq!(tr.masks, again.masks);
    }

    #[test]
    fn csv_has_one_row_per_sweep() {
        let tr = run_chain(&toy(), &cfg(), &mut stream(6, 0, Stream::Chain)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 201);
        assert!(text.starts_with("sweep,mask,g,g_lambda,freq_1,freq_2,freq_3,freq_4"));
    }
}
