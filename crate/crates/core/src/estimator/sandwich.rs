use nalgebra::DMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::mask::ComponentMask;
use crate::model::{Dataset, SubLikelihoodFamily};

/// Plug-in sandwich V̂ = Ĥ⁻¹ K̂ Ĥ⁻¹ on the per-observation scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichEstimate {
    pub h_hat: DMatrix<f64>,
    pub k_hat: DMatrix<f64>,
    pub v_hat: DMatrix<f64>,
}

/// Ĥ = (n−1)⁻¹ Σ_m ω_m Σ_i U_m^{(i)} U_m^{(i)ᵀ} and
/// K̂ = n⁻¹ Σ_i s_i s_iᵀ with s_i = Σ_m ω_m U_m^{(i)}, both at θ̂.
pub fn sandwich_variance(
    family: &dyn SubLikelihoodFamily,
    data: &Dataset,
    mask: &ComponentMask,
    theta_hat: &[f64],
) -> Result<SandwichEstimate> {
    if mask.is_degenerate() {
        return Err(Error::DegenerateMask);
    }
    let p = family.n_params();
    let n = data.n();
    let mut h = DMatrix::zeros(p, p);
    let mut k = DMatrix::zeros(p, p);
    let mut u = vec![0.0; p];
    let mut s = vec![0.0; p];
    for i in 0..n {
        s.iter_mut().for_each(|v| *v = 0.0);
        for m in mask.active() {
            family.score(theta_hat, data, m, i, &mut u)?;
            for r in 0..p {
                s[r] += u[r];
                for c in 0..p {
                    h[(r, c)] += u[r] * u[c];
                }
            }
        }
        for r in 0..p {
            for c in 0..p {
                k[(r, c)] += s[r] * s[c];
            }
        }
    }
    h /= (n - 1) as f64;
    k /= n as f64;
    let hi = linalg::inverse(&h).ok_or(Error::Singular("sensitivity estimate"))?;
    let v = &hi * &k * &hi;
    Ok(SandwichEstimate {
        h_hat: h,
        k_hat: k,
        v_hat: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{solve_mcle, EstimatorConfig, JackknifeObjective, Objective, Penalty};
    use crate::model::{simulate_common_location, CommonLocation, CommonLocationSpec};
    use crate::rng::{stream, Stream};

    #[test]
    fn scalar_sandwich_reduces_to_ratio() {
        let data = Dataset::new(vec![0.0, 1.0, 5.0], 3, 1, None).unwrap();
        let fam = CommonLocation::new(1);
        let est = sandwich_variance(&fam, &data, &ComponentMask::ones(1), &[2.0]).unwrap();
        let (h, k) = (est.h_hat[(0, 0)], est.k_hat[(0, 0)]);
        assert!((h - 14.0 / 2.0).abs() < 1e-14 && (k - 14.0 / 3.0).abs() < 1e-14);
        assert!((est.v_hat[(0, 0)] - k / (h * h)).abs() < 1e-15);
    }

    #[test]
    fn pooled_independent_means_have_half_variance() {
        let spec = CommonLocationSpec::new(2, 0, 0.0, 0.0).unwrap();
        let data = simulate_common_location(&spec, 200_000, 12).unwrap();
        let fam = CommonLocation::new(2);
        let mask = ComponentMask::ones(2);
        let th = solve_mcle(&fam, &data, &mask, &[0.0], &EstimatorConfig::default()).unwrap();
        let v = sandwich_variance(&fam, &data, &mask, &th).unwrap().v_hat[(0, 0)];
        assert!((v - 0.5).abs() < 0.01, "{v}");
    }

    #[test]
    fn sandwich_and_jackknife_rank_masks_alike() {
        let spec = CommonLocationSpec::new(10, 8, 0.9, 0.0).unwrap();
        let data = simulate_common_location(&spec, 1000, 21).unwrap();
        let fam = CommonLocation::new(10);
        let obj = JackknifeObjective::new(&fam, &data, EstimatorConfig::default(), Penalty::none(), &mut stream(21, 0, Stream::Groups)).unwrap();
        // (uncorrelated, correlated) counts spread over the attainable variances
        let codes = [1u64, 255, 256, 768, 769, 1023, 511, 771, 257, 15];
        let mut a = Vec::new();
        let mut b = Vec::new();
        for c in codes {
            let mask = ComponentMask::from_code(10, c);
            let th = obj.theta_hat(&mask).unwrap();
            let v = sandwich_variance(&fam, &data, &mask, &th).unwrap().v_hat[(0, 0)];
            a.push(v.ln());
            b.push(obj.evaluate(&mask).unwrap().g);
        }
        let rho = spearman(&a, &b);
        assert!(rho >= 0.8, "rank correlation {rho}");
    }

    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        let (ra, rb) = (ranks(a), ranks(b));
        let n = a.len() as f64;
        let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }
}
