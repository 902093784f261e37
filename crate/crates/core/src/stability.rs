//! Stability selection on a penalised chain: keep the components whose
//! sampling frequency clears a threshold calibrated to a nominal
//! per-comparison error rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{JackknifeObjective, PenaltyScale};
use crate::sampler::{select_threshold, ChainTrace, FrequencyWindow, SelectedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    /// Nominal per-comparison error rate α.
    pub alpha: f64,
    /// Penalty level λ (1 = AIC).
    pub lambda: f64,
    pub penalty_scale: PenaltyScale,
    /// Sweeps averaged into η̂.
    pub eta_window: FrequencyWindow,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            alpha: 0.1,
            lambda: 1.0,
            penalty_scale: PenaltyScale::PerObservation,
            eta_window: FrequencyWindow::All,
        }
    }
}

impl StabilityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain("alpha", self.alpha, "(0, 1)"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::domain("lambda", self.lambda, "[0, ∞)"));
        }
        Ok(())
    }
}

/// λ presets: AIC, BIC and HQC.
pub fn lambda_preset(name: &str, n: usize) -> Option<f64> {
    let n = n as f64;
    match name {
        "aic" => Some(1.0),
        "bic" => Some(0.5 * n.ln()),
        "hqc" => Some(n.ln().ln()),
        _ => None,
    }
}

/// ξ̂ = ½(η̂/(αM²) + 1).
pub fn pcer_threshold(eta: f64, m: usize, alpha: f64) -> f64 {
    0.5 * (eta / (alpha * (m * m) as f64) + 1.0)
}

/// Bound η/((2ξ − 1)M) on the expected number of false selections.
pub fn false_selection_bound(eta: f64, xi: f64, m: usize) -> f64 {
    eta / ((2.0 * xi - 1.0) * m as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub eta: f64,
    pub xi_hat: f64,
    /// Threshold actually applied (ξ̂ unless overridden).
    pub threshold: f64,
    pub stable: SelectedModel,
    pub expected_false_bound: f64,
    pub frequencies: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
    /// Ratio of the penalty range to the ĝ range over the trace.
    pub penalty_to_objective_range: Option<f64>,
    pub warning: Option<String>,
}

/// Frequencies ω̄_m are taken over `window`; η̂ over `cfg.eta_window`.
/// `threshold` replaces ξ̂ when given.
pub fn stability_select(
    trace: &ChainTrace,
    objective: &JackknifeObjective<'_>,
    cfg: &StabilityConfig,
    window: FrequencyWindow,
    threshold: Option<f64>,
) -> Result<StabilityReport> {
    cfg.validate()?;
    if trace.is_empty() {
        return Err(Error::InvalidData("empty chain trace".into()));
    }
    let m = trace.n_components();
    let eta = trace.mean_size(cfg.eta_window);
    let xi_hat = pcer_threshold(eta, m, cfg.alpha);
    let thr = threshold.unwrap_or(xi_hat);
    let frequencies = trace.frequencies(window);
    let mask = select_threshold(&frequencies, thr);
    let warning = (thr > 1.0).then(|| {
        format!("stability threshold {thr:.4} exceeds 1; no component can be selected")
    });
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let ratio = range_ratio(trace);
    if let Some(r) = ratio {
        log::info!("penalty range / objective range over the chain: {r:.4}");
    }
    Ok(StabilityReport {
        eta,
        xi_hat,
        threshold: thr,
        stable: SelectedModel::estimate(objective, mask),
        expected_false_bound: false_selection_bound(eta, xi_hat, m),
        frequencies,
        alpha: cfg.alpha,
        lambda: cfg.lambda,
        penalty_to_objective_range: ratio,
        warning,
    })
}

fn range_ratio(trace: &ChainTrace) -> Option<f64> {
    let fin: Vec<_> = trace.evaluated.iter().map(|(_, v)| v).filter(|v| v.g.is_finite()).collect();
    if fin.len() < 2 {
        return None;
    }
    let span = |f: &dyn Fn(&&crate::estimator::ObjectiveValue) -> f64| {
        let lo = fin.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = fin.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let g = span(&|v| v.g);
    (g > 0.0).then(|| span(&|v| v.penalty) / g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{EstimatorConfig, ObjectiveValue, Penalty};
    use crate::mask::ComponentMask;
    use crate::model::{simulate_common_location, CommonLocation, CommonLocationSpec, Dataset};
    use crate::rng::{stream, Stream};
    use crate::sampler::{run_chain, selection_report, CacheStats, SamplerConfig};
    use proptest::prelude::*;

    #[test]
    fn threshold_examples() {
        assert!((pcer_threshold(4.0, 10, 0.1) - 0.7).abs() < 1e-12);
        assert_eq!(pcer_threshold(0.0, 10, 0.1), 0.5);
        assert!((pcer_threshold(21.45, 45, 0.1) - 0.5 * (21.45 / 202.5 + 1.0)).abs() < 1e-12);
        assert!((pcer_threshold(21.45, 45, 0.1) - 0.5530).abs() < 1e-4);
    }

    #[test]
    fn bound_at_estimated_threshold_is_alpha_m() {
        for (eta, m, alpha) in [(4.0, 10, 0.1), (21.45, 45, 0.1), (7.3, 30, 0.05)] {
            let xi = pcer_threshold(eta, m, alpha);
            assert!((false_selection_bound(eta, xi, m) - alpha * m as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn presets() {
        assert_eq!(lambda_preset("aic", 100), Some(1.0));
        assert!((lambda_preset("bic", 100).unwrap() - 2.302_585).abs() < 1e-6);
        assert!(lambda_preset("hqc", 100).unwrap() > 1.0);
        assert_eq!(lambda_preset("other", 100), None);
    }

    fn fixture() -> (Dataset, CommonLocation) {
        let spec = CommonLocationSpec::new(10, 8, 0.9, 0.0).unwrap();
        (simulate_common_location(&spec, 30, 1).unwrap(), CommonLocation::new(10))
    }

    #[test]
    fn constant_chain_keeps_its_mask() {
        let (data, fam) = fixture();
        let obj = JackknifeObjective::new(&fam, &data, EstimatorConfig::default(), Penalty::none(), &mut stream(1, 0, Stream::Groups)).unwrap();
        let mask = ComponentMask::from_indices(10, &[1, 4, 8, 9]);
        let tr = ChainTrace {
            initial: mask.clone(),
            masks: vec![mask.clone(); 20],
            objectives: vec![ObjectiveValue::unpenalized(0.0); 20],
            evaluated: vec![],
            burn_in: 10,
            cache: CacheStats::default(),
        };
        let r = stability_select(&tr, &obj, &StabilityConfig::default(), FrequencyWindow::PostBurnIn, None).unwrap();
        assert_eq!(r.eta, 4.0);
        assert!((r.xi_hat - 0.7).abs() < 1e-12);
        assert_eq!(r.stable.mask, mask);
    }

    #[test]
    fn unpenalized_forced_threshold_matches_frequency_rule() {
        let (data, fam) = fixture();
        let obj = JackknifeObjective::new(&fam, &data, EstimatorConfig::default(), Penalty::none(), &mut stream(1, 0, Stream::Groups)).unwrap();
        let cfg = SamplerConfig::defaults_for(10);
        let tr = run_chain(&obj, &cfg, &mut stream(1, 0, Stream::Chain)).unwrap();
        let cls1 = selection_report(&tr, &obj, &cfg).unwrap();
        let st = StabilityConfig {
            lambda: 0.0,
            ..Default::default()
        };
        let cls2 = stability_select(&tr, &obj, &st, cfg.window, Some(cfg.xi)).unwrap();
        assert_eq!(cls1.threshold_rule.mask, cls2.stable.mask);
    }

    proptest! {
        #[test]
        fn threshold_monotone(eta in 0.0f64..30.0, d in 0.01f64..5.0, m in 1usize..60, alpha in 0.01f64..0.5, shrink in 0.1f64..0.99) {
            prop_assert!(pcer_threshold(eta + d, m, alpha) > pcer_threshold(eta, m, alpha));
            prop_assert!(pcer_threshold(eta, m, alpha * shrink) >= pcer_threshold(eta, m, alpha));
        }

        #[test]
        fn stable_set_shrinks_with_alpha(freqs in proptest::collection::vec(0.0f64..1.0, 1..30), eta in 0.0f64..10.0, alpha in 0.02f64..0.5) {
            let m = freqs.len();
            let loose = select_threshold(&freqs, pcer_threshold(eta, m, alpha));
            let tight = select_threshold(&freqs, pcer_threshold(eta, m, alpha / 2.0));
            for k in tight.active() {
                prop_assert!(loose.get(k));
            }
        }
    }
}
