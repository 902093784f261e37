use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{observation_terms, EstimatorConfig, ObjectiveValue};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mask::ComponentMask;
use crate::model::{Dataset, SubLikelihoodFamily};

/// Partition of the observation indices into delete groups.
///
/// With k = 1 every observation is its own group. Otherwise the indices are
/// shuffled once and cut into ⌊n/k⌋ contiguous blocks whose sizes differ by
/// at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeleteGroups {
    k: usize,
    groups: Vec<Vec<usize>>,
}

impl DeleteGroups {
    pub fn singletons(n: usize) -> Self {
        DeleteGroups {
            k: 1,
            groups: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn new<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(Error::InvalidConfig(format!("delete group size {k} must satisfy 1 ≤ k < n = {n}")));
        }
        if k == 1 {
            return Ok(Self::singletons(n));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let g = n / k;
        let (base, extra) = (n / g, n % g);
        let mut groups = Vec::with_capacity(g);
        let mut start = 0;
        for b in 0..g {
            let len = base + usize::from(b < extra);
            groups.push(idx[start..start + len].to_vec());
            start += len;
        }
        Ok(DeleteGroups { k, groups })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

/// Delete-group estimates θ̂^{(−G)} with their mean and centered scatter.
#[derive(Debug, Clone, PartialEq)]
pub struct JackknifeSet {
    pub pseudo_values: Vec<Vec<f64>>,
    pub group_size: usize,
    pub mean: Vec<f64>,
    pub scatter: DMatrix<f64>,
}

impl JackknifeSet {
    pub fn from_values(pseudo_values: Vec<Vec<f64>>, group_size: usize) -> Self {
        let g = pseudo_values.len();
        let p = pseudo_values.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; p];
        for v in &pseudo_values {
            for (a, b) in mean.iter_mut().zip(v) {
                *a += b;
            }
        }
        mean.iter_mut().for_each(|a| *a /= g as f64);
        let mut scatter = DMatrix::zeros(p, p);
        for v in &pseudo_values {
            for r in 0..p {
                for c in 0..p {
                    scatter[(r, c)] += (v[r] - mean[r]) * (v[c] - mean[c]);
                }
            }
        }
        JackknifeSet {
            pseudo_values,
            group_size,
            mean,
            scatter,
        }
    }
}

/// One Newton step from θ̃ on the score with each delete group removed:
/// θ̃ + (Σ_{j∉G} J_j)⁻¹ Σ_{j∉G} s_j, where s_j is the masked score and J_j the
/// configured inner matrix.
///
/// A singular inner matrix for any group is reported as [`Error::Singular`].
pub fn one_step_pseudo_values(
    family: &dyn SubLikelihoodFamily,
    data: &Dataset,
    mask: &ComponentMask,
    theta_tilde: &[f64],
    groups: &DeleteGroups,
    cfg: &EstimatorConfig,
) -> Result<JackknifeSet> {
    if mask.is_degenerate() {
        return Err(Error::DegenerateMask);
    }
    let t = observation_terms(family, data, mask, theta_tilde, cfg.inner)?;
    let p = t.p;
    let n = data.n();
    let mut s_tot = DVector::<f64>::zeros(p);
    let mut j_tot = DMatrix::<f64>::zeros(p, p);
    for i in 0..n {
        for r in 0..p {
            s_tot[r] += t.scores[i * p + r];
            for c in 0..p {
                j_tot[(r, c)] += t.inner[(i * p + r) * p + c];
            }
        }
    }
    let mut values = Vec::with_capacity(groups.len());
    for g in groups.groups() {
        if n - g.len() < p {
            return Err(Error::InvalidConfig(format!(
                "delete group of {} leaves fewer than p = {p} observations",
                g.len()
            )));
        }
        let mut s = s_tot.clone();
        let mut j = j_tot.clone();
        for &i in g {
            for r in 0..p {
                s[r] -= t.scores[i * p + r];
                for c in 0..p {
                    j[(r, c)] -= t.inner[(i * p + r) * p + c];
                }
            }
        }
        let step = linalg::solve(&j, &s).ok_or(Error::Singular("jackknife inner matrix"))?;
        values.push(theta_tilde.iter().zip(step.iter()).map(|(a, b)| a + b).collect());
    }
    Ok(JackknifeSet::from_values(values, groups.k()))
}

/// log det of the pseudo-value scatter plus ε·I; +∞ when it is singular.
pub fn g_hat(jk: &JackknifeSet, ridge: f64, singular_tol: f64) -> ObjectiveValue {
    let p = jk.scatter.nrows();
    let g = if jk.pseudo_values.len() < p + 1 {
        f64::INFINITY
    } else {
        linalg::log_det_spd(&jk.scatter, ridge, singular_tol).unwrap_or(f64::INFINITY)
    };
    ObjectiveValue::unpenalized(g)
}

/// Delete-group jackknife standard error per coordinate,
/// sqrt((G − 1)/G · Σ_g (θ̂^{(−g)} − θ̄)²).
pub fn jackknife_standard_error(jk: &JackknifeSet) -> Vec<f64> {
    let g = jk.pseudo_values.len() as f64;
    (0..jk.mean.len())
        .map(|r| ((g - 1.0) / g * jk.scatter[(r, r)]).sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{solve_mcle, InnerMatrix};
    use crate::model::{simulate_common_location, CommonLocation, CommonLocationSpec};
    use crate::rng::{stream, Stream};

    #[test]
    fn two_point_hand_example() {
        let data = Dataset::new(vec![0.0, 2.0], 2, 1, None).unwrap();
        let fam = CommonLocation::new(1);
        let mask = ComponentMask::ones(1);
        for inner in [InnerMatrix::Observed, InnerMatrix::OuterProduct] {
            let cfg = EstimatorConfig {
                inner,
                ..Default::default()
            };
            let jk = one_step_pseudo_values(&fam, &data, &mask, &[1.0], &DeleteGroups::singletons(2), &cfg).unwrap();
            assert_eq!(jk.pseudo_values, vec![vec![2.0], vec![0.0]]);
            assert_eq!(jk.mean, vec![1.0]);
            let g = g_hat(&jk, 0.0, 1e-12);
            assert!((g.g - 2f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn one_step_is_exact_leave_one_out_for_linear_scores() {
        let spec = CommonLocationSpec::new(6, 4, 0.7, 0.3).unwrap();
        let data = simulate_common_location(&spec, 12, 9).unwrap();
        let fam = CommonLocation::new(6);
        let cfg = EstimatorConfig::default();
        for code in [1u64, 0b101, 0b111111, 0b110010] {
            let mask = ComponentMask::from_code(6, code);
            let th = solve_mcle(&fam, &data, &mask, &[0.0], &cfg).unwrap();
            let jk = one_step_pseudo_values(&fam, &data, &mask, &th, &DeleteGroups::singletons(12), &cfg).unwrap();
            for i in 0..12 {
                let rows: Vec<usize> = (0..12).filter(|&j| j != i).collect();
                let sub = data.select_rows(&rows).unwrap();
                let exact = solve_mcle(&fam, &sub, &mask, &[0.0], &cfg).unwrap();
                assert!((jk.pseudo_values[i][0] - exact[0]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn identical_pseudo_values_are_infinite_unless_ridged() {
        let jk = JackknifeSet::from_values(vec![vec![1.5]; 4], 1);
        assert_eq!(g_hat(&jk, 0.0, 1e-12).g, f64::INFINITY);
        let ridged = g_hat(&jk, 0.25, 1e-12).g;
        assert!(ridged.is_finite() && ridged >= 0.25f64.ln());
    }

    #[test]
    fn groups_partition_with_balanced_sizes() {
        let mut rng = stream(3, 0, Stream::Groups);
        let g = DeleteGroups::new(333, 10, &mut rng).unwrap();
        assert_eq!(g.len(), 33);
        let mut all: Vec<usize> = g.groups().iter().flatten().copied().collect();
        let sizes: Vec<usize> = g.groups().iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        all.sort_unstable();
        assert_eq!(all, (0..333).collect::<Vec<_>>());
        assert!(DeleteGroups::new(10, 10, &mut rng).is_err());
    }

    #[test]
    fn standard_error_of_two_point_set() {
        let jk = JackknifeSet::from_values(vec![vec![2.0], vec![0.0]], 1);
        // (1/2) · 2 = 1
        assert!((jackknife_standard_error(&jk)[0] - 1.0).abs() < 1e-15);
    }
}
