use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{g_hat, jackknife_standard_error, one_step_pseudo_values, solve_mcle, DeleteGroups, EstimatorConfig};
use super::{JackknifeSet, Pilot};
use crate::error::{Error, Result};
use crate::mask::ComponentMask;
use crate::model::{Dataset, SubLikelihoodFamily};

/// ĝ, its complexity penalty and their sum. An infinite `g` marks a mask the
/// sampler must never move to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub g: f64,
    pub penalty: f64,
    pub total: f64,
}

impl ObjectiveValue {
    pub fn unpenalized(g: f64) -> Self {
        ObjectiveValue {
            g,
            penalty: 0.0,
            total: g,
        }
    }

    pub fn infinite() -> Self {
        Self::unpenalized(f64::INFINITY)
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

/// ĝ_λ(ω) = ĝ(ω) + λ·|ω|.
pub fn g_hat_penalized(g: ObjectiveValue, mask: &ComponentMask, lambda: f64) -> ObjectiveValue {
    let penalty = lambda * mask.count() as f64;
    ObjectiveValue {
        g: g.g,
        penalty,
        total: g.g + penalty,
    }
}

/// How λ translates into a per-component penalty on the log-variance scale.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyScale {
    /// 2λ/n per component: an information criterion −2ℓ + 2λk divided by n,
    /// since n·Δlog Var plays the role of −2Δℓ.
    #[default]
    PerObservation,
    /// λ per component as written.
    Literal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub lambda: f64,
    pub scale: PenaltyScale,
}

impl Penalty {
    pub fn none() -> Self {
        Penalty::default()
    }

    pub fn new(lambda: f64, scale: PenaltyScale) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::domain("lambda", lambda, "[0, ∞)"));
        }
        Ok(Penalty { lambda, scale })
    }

    pub fn per_component(&self, n: usize) -> f64 {
        match self.scale {
            PenaltyScale::PerObservation => 2.0 * self.lambda / n as f64,
            PenaltyScale::Literal => self.lambda,
        }
    }
}

/// A map from masks to objective values, as seen by the sampler.
pub trait Objective: Sync {
    fn n_components(&self) -> usize;

    /// Degenerate or singular states yield an infinite value; errors are
    /// reserved for genuine failures such as non-convergence.
    fn evaluate(&self, mask: &ComponentMask) -> Result<ObjectiveValue>;
}

/// Wraps a closure returning ĝ; the all-zero mask maps to +∞.
pub struct FnObjective<F> {
    m: usize,
    f: F,
}

impl<F: Fn(&ComponentMask) -> f64 + Sync> FnObjective<F> {
    pub fn new(m: usize, f: F) -> Self {
        FnObjective { m, f }
    }
}

impl<F: Fn(&ComponentMask) -> f64 + Sync> Objective for FnObjective<F> {
    fn n_components(&self) -> usize {
        self.m
    }

    fn evaluate(&self, mask: &ComponentMask) -> Result<ObjectiveValue> {
        if mask.is_degenerate() {
            return Ok(ObjectiveValue::infinite());
        }
        Ok(ObjectiveValue::unpenalized((self.f)(mask)))
    }
}

/// The one-step jackknife objective ĝ_λ for a family on a fixed dataset with
/// fixed delete groups.
pub struct JackknifeObjective<'a> {
    family: &'a dyn SubLikelihoodFamily,
    data: &'a Dataset,
    cfg: EstimatorConfig,
    groups: DeleteGroups,
    penalty: Penalty,
    pilot: Option<Vec<f64>>,
}

impl<'a> JackknifeObjective<'a> {
    /// `rng` shuffles observations into delete groups when k > 1.
    pub fn new<R: Rng + ?Sized>(
        family: &'a dyn SubLikelihoodFamily,
        data: &'a Dataset,
        cfg: EstimatorConfig,
        penalty: Penalty,
        rng: &mut R,
    ) -> Result<Self> {
        family.validate(data)?;
        cfg.validate(data.n())?;
        let groups = DeleteGroups::new(data.n(), cfg.delete_k, rng)?;
        if groups.len() < family.n_params() + 1 {
            return Err(Error::InvalidConfig(format!(
                "{} delete groups cannot support a {}-parameter scatter",
                groups.len(),
                family.n_params()
            )));
        }
        let pilot = match cfg.pilot {
            Pilot::PerMask => None,
            Pilot::Shared => {
                let all = ComponentMask::ones(family.n_components());
                let init = family.initial_theta(data, &all);
                Some(solve_mcle(family, data, &all, &init, &cfg)?)
            }
        };
        Ok(JackknifeObjective {
            family,
            data,
            cfg,
            groups,
            penalty,
            pilot,
        })
    }

    pub fn family(&self) -> &'a dyn SubLikelihoodFamily {
        self.family
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty
    }

    pub fn groups(&self) -> &DeleteGroups {
        &self.groups
    }

    /// θ̂(ω) from the family's mask-dependent starting value.
    pub fn theta_hat(&self, mask: &ComponentMask) -> Result<Vec<f64>> {
        let init = self.family.initial_theta(self.data, mask);
        solve_mcle(self.family, self.data, mask, &init, &self.cfg)
    }

    pub fn jackknife(&self, mask: &ComponentMask) -> Result<JackknifeSet> {
        let tilde = match &self.pilot {
            Some(p) => p.clone(),
            None => self.theta_hat(mask)?,
        };
        one_step_pseudo_values(self.family, self.data, mask, &tilde, &self.groups, &self.cfg)
    }
}

impl Objective for JackknifeObjective<'_> {
    fn n_components(&self) -> usize {
        self.family.n_components()
    }

    fn evaluate(&self, mask: &ComponentMask) -> Result<ObjectiveValue> {
        if mask.is_degenerate() {
            return Ok(ObjectiveValue::infinite());
        }
        let g = match self.jackknife(mask) {
            Ok(jk) => g_hat(&jk, self.cfg.ridge, self.cfg.singular_tol),
            Err(Error::Singular(_)) => ObjectiveValue::infinite(),
            Err(e) => return Err(e),
        };
        Ok(g_hat_penalized(g, mask, self.penalty.per_component(self.data.n())))
    }
}

/// Jackknife standard error of θ̂(ω) with its own delete-k grouping.
pub fn jackknife_se_for<R: Rng + ?Sized>(
    objective: &JackknifeObjective<'_>,
    mask: &ComponentMask,
    delete_k: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let groups = DeleteGroups::new(objective.data.n(), delete_k, rng)?;
    let theta = objective.theta_hat(mask)?;
    let jk = one_step_pseudo_values(objective.family, objective.data, mask, &theta, &groups, &objective.cfg)?;
    Ok(jackknife_standard_error(&jk))
}

/// Exact log Var(μ̂(ω)) for the common-location model up to the additive
/// −log n: log(|ω| + 2ρ Σ_{l<m≤d*} ω_l ω_m) − 2 log |ω|.
pub fn g0_common_location(mask: &ComponentMask, rho: f64, d_star: usize) -> Result<f64> {
    if mask.is_degenerate() {
        return Err(Error::DegenerateMask);
    }
    if d_star > mask.len() {
        return Err(Error::InvalidConfig(format!(
            "d_star = {d_star} exceeds mask length {}",
            mask.len()
        )));
    }
    let k = mask.count() as f64;
    let c = mask.active().filter(|&m| m < d_star).count() as f64;
    Ok((k + rho * c * (c - 1.0)).ln() - 2.0 * k.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::InnerMatrix;
    use crate::model::{simulate_common_location, CommonLocation, CommonLocationSpec};
    use crate::rng::{stream, Stream};
    use proptest::prelude::*;

    #[test]
    fn penalty_examples() {
        let g = ObjectiveValue::unpenalized(1.0);
        let six = ComponentMask::from_indices(10, &[0, 1, 2, 3, 4, 5]);
        assert_eq!(g_hat_penalized(g, &six, 0.0).total, 1.0);
        assert_eq!(g_hat_penalized(g, &six, 1.0).total, 7.0);
        let bic = 0.5 * 100f64.ln();
        assert!((bic - 2.302_585).abs() < 1e-6);
        let one = ComponentMask::from_indices(10, &[3]);
        assert!((g_hat_penalized(ObjectiveValue::unpenalized(0.0), &one, bic).penalty - 2.302_585).abs() < 1e-6);
        let inf = g_hat_penalized(ObjectiveValue::infinite(), &six, 1.0);
        assert_eq!(inf.total, f64::INFINITY);
    }

    #[test]
    fn penalty_scales() {
        let p = Penalty::new(1.0, PenaltyScale::PerObservation).unwrap();
        assert_eq!(p.per_component(100), 0.02);
        let p = Penalty::new(1.0, PenaltyScale::Literal).unwrap();
        assert_eq!(p.per_component(100), 1.0);
        assert!(Penalty::new(-1.0, PenaltyScale::Literal).is_err());
    }

    #[test]
    fn g0_examples() {
        let single = ComponentMask::from_indices(10, &[4]);
        assert_eq!(g0_common_location(&single, 0.5, 8).unwrap(), 0.0);
        let all = ComponentMask::ones(10);
        assert!((g0_common_location(&all, 0.5, 8).unwrap() - 0.38f64.ln()).abs() < 1e-12);
        let unc = ComponentMask::from_indices(10, &[8, 9]);
        assert!((g0_common_location(&unc, 0.5, 8).unwrap() + 2f64.ln()).abs() < 1e-12);
        let plus = ComponentMask::from_indices(10, &[0, 8, 9]);
        assert!((g0_common_location(&plus, 0.5, 8).unwrap() + 3f64.ln()).abs() < 1e-12);
        assert!(g0_common_location(&ComponentMask::zeros(10), 0.5, 8).is_err());
    }

    fn closed_form_g(data: &Dataset, mask: &ComponentMask) -> f64 {
        let means = data.column_means();
        let mut s = 0.0;
        for i in 0..data.n() {
            let v: f64 = mask.active().map(|m| data.get(i, m) - means[m]).sum();
            s += v * v;
        }
        let k = mask.count() as f64;
        s.ln() - 2.0 * k.ln() - 2.0 * ((data.n() - 1) as f64).ln()
    }

    #[test]
    fn objective_matches_closed_form() {
        let spec = CommonLocationSpec::new(10, 8, 0.9, 0.0).unwrap();
        let data = simulate_common_location(&spec, 25, 2).unwrap();
        let fam = CommonLocation::new(10);
        let obj = JackknifeObjective::new(
            &fam,
            &data,
            EstimatorConfig::default(),
            Penalty::none(),
            &mut stream(2, 0, Stream::Groups),
        )
        .unwrap();
        for code in [1u64, 17, 300, 1023, 512 + 256] {
            let mask = ComponentMask::from_code(10, code);
            let v = obj.evaluate(&mask).unwrap();
            assert!((v.g - closed_form_g(&data, &mask)).abs() < 1e-8);
        }
        assert_eq!(obj.evaluate(&ComponentMask::zeros(10)).unwrap().g, f64::INFINITY);
    }

    #[test]
    fn shared_pilot_and_outer_product_stay_finite() {
        let spec = CommonLocationSpec::new(5, 3, 0.5, 0.0).unwrap();
        let data = simulate_common_location(&spec, 30, 5).unwrap();
        let fam = CommonLocation::new(5);
        for (pilot, inner) in [(Pilot::Shared, InnerMatrix::Observed), (Pilot::PerMask, InnerMatrix::OuterProduct)] {
            let cfg = EstimatorConfig {
                pilot,
                inner,
                ..Default::default()
            };
            let obj = JackknifeObjective::new(&fam, &data, cfg, Penalty::none(), &mut stream(5, 0, Stream::Groups)).unwrap();
            assert!(obj.evaluate(&ComponentMask::from_code(5, 0b10110)).unwrap().g.is_finite());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn invariant_to_observation_and_component_order(seed in 0u64..1000, code in 1u64..64) {
            let spec = CommonLocationSpec::new(6, 4, 0.6, 0.0).unwrap();
            let data = simulate_common_location(&spec, 9, seed).unwrap();
            let fam = CommonLocation::new(6);
            let mk = |d: &Dataset| {
                JackknifeObjective::new(&fam, d, EstimatorConfig::default(), Penalty::none(), &mut stream(0, 0, Stream::Groups))
                    .unwrap()
                    .evaluate(&ComponentMask::from_code(6, code))
                    .unwrap()
                    .g
            };
            let base = mk(&data);
            let rev: Vec<usize> = (0..9).rev().collect();
            let reversed_rows = data.select_rows(&rev).unwrap();
            prop_assert!((base - mk(&reversed_rows)).abs() < 1e-10);
            // reversing the columns maps the mask to its mirror image
            let mut vals = Vec::new();
            for i in 0..9 {
                vals.extend(data.row(i).iter().rev());
            }
            let mirrored = Dataset::new(vals, 9, 6, None).unwrap();
            let mirror_code = (0..6).filter(|b| code >> b & 1 == 1).map(|b| 1u64 << (5 - b)).sum::<u64>();
            let g2 = JackknifeObjective::new(&fam, &mirrored, EstimatorConfig::default(), Penalty::none(), &mut stream(0, 0, Stream::Groups))
                .unwrap()
                .evaluate(&ComponentMask::from_code(6, mirror_code))
                .unwrap()
                .g;
            prop_assert!((base - g2).abs() < 1e-10);
        }

        #[test]
        fn penalized_total_grows_with_popcount(g in -5.0f64..5.0, lambda in 0.01f64..3.0, a in 1usize..10) {
            let small = ComponentMask::from_indices(10, &(0..a).collect::<Vec<_>>());
            let big = small.with(a, true);
            let v = ObjectiveValue::unpenalized(g);
            prop_assert!(g_hat_penalized(v, &big, lambda).total > g_hat_penalized(v, &small, lambda).total);
        }
    }
}
