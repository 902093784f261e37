use serde::Serialize;

/// Chebyshev-type upper control limit on the objective and the share of
/// post-reference values that exceed it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlChart {
    pub g_star: f64,
    pub g_bar: f64,
    pub s2: f64,
    pub limit: f64,
    pub exceed_fraction: f64,
    /// Largest exceed fraction compatible with equilibrium, 1/b².
    pub allowed_fraction: f64,
    pub equilibrium: bool,
}

/// Limit ĝ* + sqrt(b²s² + b²(ḡ − ĝ*)²) from the finite values among the first
/// `n_ref` objectives (min ĝ*, mean ḡ, sample variance s²); the chain is
/// judged in equilibrium when at most 1/b² of the later values exceed it.
///
/// `None` when fewer than two reference values are finite or nothing follows
/// the reference window.
pub fn control_chart(objectives: &[f64], b: f64, n_ref: usize) -> Option<ControlChart> {
    if n_ref >= objectives.len() {
        return None;
    }
    let reference: Vec<f64> = objectives[..n_ref].iter().copied().filter(|v| v.is_finite()).collect();
    if reference.len() < 2 {
        return None;
    }
    let k = reference.len() as f64;
    let g_star = reference.iter().copied().fold(f64::INFINITY, f64::min);
    let g_bar = reference.iter().sum::<f64>() / k;
    let s2 = reference.iter().map(|v| (v - g_bar).powi(2)).sum::<f64>() / (k - 1.0);
    let b2 = b * b;
    let limit = g_star + (b2 * s2 + b2 * (g_bar - g_star).powi(2)).sqrt();
    let later = &objectives[n_ref..];
    let exceed = later.iter().filter(|&&v| !(v <= limit)).count();
    let exceed_fraction = exceed as f64 / later.len() as f64;
    Some(ControlChart {
        g_star,
        g_bar,
        s2,
        limit,
        exceed_fraction,
        allowed_fraction: 1.0 / b2,
        equilibrium: exceed_fraction <= 1.0 / b2,
    })
}
