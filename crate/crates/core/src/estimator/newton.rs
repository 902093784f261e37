use nalgebra::{DMatrix, DVector};

use super::{observation_terms, EstimatorConfig, InnerMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mask::ComponentMask;
use crate::model::{Dataset, SubLikelihoodFamily};

const MAX_HALVINGS: usize = 60;

fn totals(
    family: &dyn SubLikelihoodFamily,
    data: &Dataset,
    mask: &ComponentMask,
    theta: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let t = observation_terms(family, data, mask, theta, InnerMatrix::Observed)?;
    let p = t.p;
    let mut s = DVector::zeros(p);
    let mut j = DMatrix::zeros(p, p);
    for i in 0..data.n() {
        for r in 0..p {
            s[r] += t.scores[i * p + r];
            for c in 0..p {
                j[(r, c)] += t.inner[(i * p + r) * p + c];
            }
        }
    }
    Ok((s, j))
}

fn norm(s: &DVector<f64>, n: usize) -> f64 {
    s.amax() / n as f64
}

/// Root of the masked aggregate score Σ_i Σ_m ω_m U_m^{(i)}(θ) = 0.
///
/// Uses the family's closed form when it has one, otherwise damped Newton
/// from `theta_init` with step halving on the score norm.
pub fn solve_mcle(
    family: &dyn SubLikelihoodFamily,
    data: &Dataset,
    mask: &ComponentMask,
    theta_init: &[f64],
    cfg: &EstimatorConfig,
) -> Result<Vec<f64>> {
    if mask.is_degenerate() {
        return Err(Error::DegenerateMask);
    }
    if let Some(t) = family.closed_form(data, mask) {
        return Ok(t);
    }
    newton(family, data, mask, theta_init, cfg)
}

pub(crate) fn newton(
    family: &dyn SubLikelihoodFamily,
    data: &Dataset,
    mask: &ComponentMask,
    theta_init: &[f64],
    cfg: &EstimatorConfig,
) -> Result<Vec<f64>> {
    if mask.is_degenerate() {
        return Err(Error::DegenerateMask);
    }
    let n = data.n();
    family.check_theta(theta_init)?;
    let mut theta = DVector::from_column_slice(theta_init);
    let (mut s, mut j) = totals(family, data, mask, theta.as_slice())?;
    for _ in 0..cfg.max_iter {
        let current = norm(&s, n);
        if current <= cfg.root_tol {
            return Ok(theta.as_slice().to_vec());
        }
        let step = linalg::solve(&j, &s).ok_or(Error::Singular("composite information"))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand = &theta + &step * t;
            if family.check_theta(cand.as_slice()).is_ok() {
                if let Ok((s2, j2)) = totals(family, data, mask, cand.as_slice()) {
                    if norm(&s2, n) < current {
                        theta = cand;
                        s = s2;
                        j = j2;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let score_norm = norm(&s, n);
    if score_norm <= cfg.root_tol {
        return Ok(theta.as_slice().to_vec());
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iter,
        score_norm,
        last: theta.as_slice().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_common_location, simulate_exchangeable, CommonLocation, CommonLocationSpec};
    use crate::model::{ExchangeablePairs, ExchangeableSpec};

    #[test]
    fn closed_form_examples() {
        let data = Dataset::new(vec![0.0, 2.0, 2.0, 4.0], 2, 2, None).unwrap();
        let fam = CommonLocation::new(2);
        let cfg = EstimatorConfig::default();
        let both = solve_mcle(&fam, &data, &ComponentMask::ones(2), &[0.0], &cfg).unwrap();
        assert_eq!(both, vec![2.0]);
        let second = solve_mcle(&fam, &data, &ComponentMask::from_indices(2, &[1]), &[0.0], &cfg).unwrap();
        assert_eq!(second, vec![3.0]);
    }

    #[test]
    fn newton_agrees_with_closed_form() {
        let spec = CommonLocationSpec::new(10, 8, 0.9, 1.5).unwrap();
        let data = simulate_common_location(&spec, 25, 4).unwrap();
        let fam = CommonLocation::new(10);
        let cfg = EstimatorConfig::default();
        for code in [1u64, 3, 0b1010_1010, 1023, 0b11_0000_0001] {
            let mask = ComponentMask::from_code(10, code);
            let cf = solve_mcle(&fam, &data, &mask, &[0.0], &cfg).unwrap();
            let nt = newton(&fam, &data, &mask, &[-3.0], &cfg).unwrap();
            assert!((cf[0] - nt[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_mask_is_an_error() {
        let data = Dataset::new(vec![0.0, 2.0, 2.0, 4.0], 2, 2, None).unwrap();
        let r = solve_mcle(&CommonLocation::new(2), &data, &ComponentMask::zeros(2), &[0.0], &Default::default());
        assert!(matches!(r, Err(Error::DegenerateMask)));
    }

    #[test]
    fn exchangeable_single_pair_is_consistent() {
        let n = 20_000;
        let data = simulate_exchangeable(&ExchangeableSpec::new(2, 0.5).unwrap(), n, 17).unwrap();
        let fam = ExchangeablePairs::new(2);
        let mask = ComponentMask::ones(1);
        let init = fam.initial_theta(&data, &mask);
        let r = solve_mcle(&fam, &data, &mask, &init, &Default::default()).unwrap()[0];
        // pairwise estimator variance at n: (1 − ρ²)² / (n (1 + ρ²))
        let se = ((1.0 - 0.25f64).powi(2) / (1.25 * n as f64)).sqrt();
        assert!((r - 0.5).abs() < 3.0 * se, "rho_hat {r}, se {se}");
    }

    #[test]
    fn non_convergence_carries_last_iterate() {
        let data = simulate_exchangeable(&ExchangeableSpec::new(3, 0.3).unwrap(), 50, 1).unwrap();
        let fam = ExchangeablePairs::new(3);
        let cfg = EstimatorConfig {
            max_iter: 1,
            root_tol: 1e-300,
            ..Default::default()
        };
        match newton(&fam, &data, &ComponentMask::ones(3), &[0.0], &cfg) {
            Err(Error::NonConvergence { last, .. }) => assert_eq!(last.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
