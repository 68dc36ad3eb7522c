//! h-depth, integrated (projection) depth, rankings and the sample h-mode.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::funcspace::{
    quad_form_values, same_grid, sample_gaussian, CovOperator, Curve, FunctionalSample, GaussianMeasureSpec,
};
use crate::kernels::{RadialFamily, RadialKappa};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthMethod {
    HDepth,
    IntegratedMc,
    IntegratedClosed,
}

/// Per-curve depths with their ranking (rank 1 is the deepest curve).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    pub depths: Vec<f64>,
    pub ranks: Vec<usize>,
    pub method: DepthMethod,
    pub kernel: String,
}

impl DepthReport {
    /// Ranks by descending depth, ties broken by input order.
    pub fn from_depths(depths: Vec<f64>, method: DepthMethod, kernel: String) -> Self {
        let ranks = rank_descending(&depths);
        DepthReport {
            depths,
            ranks,
            method,
            kernel,
        }
    }
}

fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

fn check_sample_point(s: &FunctionalSample, x: &Curve) -> Result<()> {
    if same_grid(s.grid(), x.grid()) {
        Ok(())
    } else {
        Err(Error::IncompatibleGrids)
    }
}

fn h_depth_values(kappa: &RadialKappa, s: &FunctionalSample, x: &[f64]) -> f64 {
    let grid = s.grid();
    let total: f64 = s
        .rows()
        .map(|xi| kappa.eval(grid.sq_dist(x, xi).max(0.0).sqrt()))
        .sum();
    total / s.n() as f64
}

/// Sample h-depth `n⁻¹ Σ κ(‖x − Xᵢ‖)`.
pub fn h_depth(kappa: &RadialKappa, s: &FunctionalSample, x: &Curve) -> Result<f64> {
    check_sample_point(s, x)?;
    Ok(h_depth_values(kappa, s, x.values()))
}

/// Depth of every sample curve with respect to the whole sample (itself
/// included).
pub fn depth_rank(kappa: &RadialKappa, s: &FunctionalSample) -> DepthReport {
    let depths = (0..s.n())
        .into_par_iter()
        .map(|i| h_depth_values(kappa, s, s.row(i)))
        .collect();
    DepthReport::from_depths(depths, DepthMethod::HDepth, kappa.to_string())
}

/// Leave-one-out variant of [`depth_rank`]: curve `i` is scored against the
/// other `n − 1` curves.
pub fn depth_rank_loo(kappa: &RadialKappa, s: &FunctionalSample) -> Result<DepthReport> {
    let n = s.n();
    if n < 2 {
        return invalid("leave-one-out depth needs at least two curves");
    }
    let grid = s.grid();
    let depths = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = s.row(i);
            let total: f64 = s
                .rows()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, xj)| kappa.eval(grid.sq_dist(xi, xj).max(0.0).sqrt()))
                .sum();
            total / (n - 1) as f64
        })
        .collect();
    Ok(DepthReport::from_depths(depths, DepthMethod::HDepth, format!("{kappa},loo")))
}

/// Type-7 (linear interpolation) empirical quantile.
pub(crate) fn quantile_type7(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Flags curves whose depth is strictly below the `alpha` quantile of all
/// depths.
pub fn outliers(report: &DepthReport, alpha: f64) -> Result<Vec<bool>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    if report.depths.is_empty() {
        return invalid("empty depth report");
    }
    let q = quantile_type7(&report.depths, alpha);
    Ok(report.depths.iter().map(|d| *d < q).collect())
}

/// Sample h-mode: the deepest sample curve (smallest index on ties).
///
/// Returns the index, the curve and its depth.
pub fn h_mode(kappa: &RadialKappa, s: &FunctionalSample) -> (usize, Curve, f64) {
    let n = s.n();
    let depths: Vec<f64> = if kappa.family == RadialFamily::Se && n > 64 {
        pairwise_se_depths(kappa, s)
    } else {
        (0..n)
            .into_par_iter()
            .map(|i| h_depth_values(kappa, s, s.row(i)))
            .collect()
    };
    let best = argmax_first(&depths);
    (best, s.curve(best), depths[best])
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if v.total_cmp(&values[best]) == Ordering::Greater {
            best = i;
        }
    }
    best
}

/// All self-depths through one weighted Gram product; `O(n²m)` flops in a
/// single matrix multiply instead of `n²` distance loops.
fn pairwise_se_depths(kappa: &RadialKappa, s: &FunctionalSample) -> Vec<f64> {
    let n = s.n();
    let m = s.m();
    let sw: Vec<f64> = s.grid().weights().iter().map(|w| w.sqrt()).collect();
    let z = DMatrix::from_fn(m, n, |k, i| sw[k] * s.row(i)[k]);
    let inner = z.transpose() * &z;
    let norms: Vec<f64> = (0..n).map(|i| inner[(i, i)]).collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let total: f64 = (0..n)
                .map(|j| {
                    let d2 = (norms[i] + norms[j] - 2.0 * inner[(i, j)]).max(0.0);
                    kappa.eval_sq(d2)
                })
                .sum();
            total / n as f64
        })
        .collect()
}

/// Monte Carlo integrated depth: `m⁻¹ Σⱼ n⁻¹ Σᵢ κ₁(|⟨x − Xᵢ, vⱼ⟩|)` with
/// directions `vⱼ` drawn from `nu`.
pub fn integrated_depth_mc(
    kappa1: &RadialKappa,
    nu: &GaussianMeasureSpec,
    s: &FunctionalSample,
    x: &Curve,
    m_proj: usize,
    seed: u64,
) -> Result<f64> {
    check_sample_point(s, x)?;
    if !same_grid(nu.grid(), s.grid()) {
        return Err(Error::IncompatibleGrids);
    }
    if m_proj == 0 {
        return invalid("need at least one projection");
    }
    let dirs = sample_gaussian(nu, m_proj, seed)?;
    let grid = s.grid();
    let diffs: Vec<Vec<f64>> = s
        .rows()
        .map(|xi| {
            x.values()
                .iter()
                .zip(xi)
                .zip(grid.weights())
                .map(|((a, b), w)| w * (a - b))
                .collect()
        })
        .collect();
    let per_dir: Vec<f64> = (0..m_proj)
        .into_par_iter()
        .map(|j| {
            let v = dirs.row(j);
            let total: f64 = diffs
                .iter()
                .map(|d| {
                    let p: f64 = d.iter().zip(v).map(|(a, b)| a * b).sum();
                    kappa1.eval(p.abs())
                })
                .sum();
            total / s.n() as f64
        })
        .collect();
    Ok(per_dir.iter().sum::<f64>() / m_proj as f64)
}

/// Closed-form integrated depth for the unit Gauss profile and `ν = N(0, C)`:
/// `n⁻¹ Σᵢ (⟨C(x − Xᵢ), x − Xᵢ⟩ + 1)^{−1/2}`.
pub fn integrated_depth_closed(c: &CovOperator, s: &FunctionalSample, x: &Curve) -> Result<f64> {
    check_sample_point(s, x)?;
    if !same_grid(c.grid(), s.grid()) {
        return Err(Error::IncompatibleGrids);
    }
    let mut d = vec![0.0; s.m()];
    let total: f64 = s
        .rows()
        .map(|xi| {
            d.iter_mut()
                .zip(x.values().iter().zip(xi))
                .for_each(|(di, (a, b))| *di = a - b);
            1.0 / (quad_form_values(c, &d).max(0.0) + 1.0).sqrt()
        })
        .sum();
    Ok(total / s.n() as f64)
}

/// Diameter `2√(c_ε (1 + λ₁))` of the level set `{x : D(x) ≥ D(m) − ε}` of the
/// Gauss h-depth of `N(m, C)`, an ellipsoid with
/// `c_ε = −2 log(1 − ε det(I + C)^{1/2})`.
pub fn gaussian_level_set_diameter(g: &GaussianMeasureSpec, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return invalid(format!("epsilon must be positive, got {epsilon}"));
    }
    let eig = g.cov.eigenpairs()?;
    let log_det: f64 = eig.values.iter().map(|l| l.ln_1p()).sum();
    let mode_depth = (-0.5 * log_det).exp();
    if epsilon >= mode_depth {
        return invalid(format!("epsilon {epsilon} must be below the modal depth {mode_depth}"));
    }
    let c_eps = -2.0 * (-epsilon * (0.5 * log_det).exp()).ln_1p();
    let lambda1 = eig.values.first().copied().unwrap_or(0.0);
    Ok(2.0 * (c_eps * (1.0 + lambda1)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{kme_eval, EmbeddedMeasure};
    use crate::funcspace::{cosine_basis, make_uniform_grid};
    use crate::kernels::KernelSpec;
    use std::sync::Arc;

    fn f_family() -> (FunctionalSample, Curve) {
        let g = make_uniform_grid(21, 0.0, 1.0).unwrap();
        let f = Curve::from_fn(g, |t| (std::f64::consts::PI * t).sin()).unwrap();
        let s = FunctionalSample::from_curves(&[f.scale(-1.0), f.scale(0.0), f.clone()]).unwrap();
        (s, f)
    }

    #[test]
    fn test_h_depth_examples() {
        let g = make_uniform_grid(5, 0.0, 1.0).unwrap();
        let se = RadialKappa::se(1.0).unwrap();
        let x = Curve::from_fn(g.clone(), |t| t).unwrap();
        let single = FunctionalSample::from_curves(std::slice::from_ref(&x)).unwrap();
        assert_eq!(h_depth(&se, &single, &x).unwrap(), se.at_zero());

        let far = Curve::constant(g.clone(), 1e6).unwrap();
        assert!(h_depth(&se, &single, &far).unwrap() < 1e-12);

        let zero = Curve::zeros(g.clone());
        let one = Curve::constant(g.clone(), 1.0).unwrap();
        let s = FunctionalSample::from_curves(&[zero.clone(), one]).unwrap();
        let want = (1.0 + (-0.5f64).exp()) / 2.0;
        assert!((h_depth(&se, &s, &zero).unwrap() - want).abs() < 1e-15);

        let other = Curve::zeros(make_uniform_grid(6, 0.0, 1.0).unwrap());
        assert_eq!(h_depth(&se, &s, &other), Err(Error::IncompatibleGrids));
    }

    #[test]
    fn test_h_depth_equals_kme() {
        let (s, f) = f_family();
        for kappa in [RadialKappa::se(0.5).unwrap(), RadialKappa::imq(2.0).unwrap()] {
            let e = EmbeddedMeasure::empirical(s.clone(), KernelSpec::identity(kappa)).unwrap();
            let x = f.shift(0.3);
            let a = h_depth(&kappa, &s, &x).unwrap();
            let b = kme_eval(&e, &x).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn test_depth_rank_examples() {
        let se = RadialKappa::se(1.0).unwrap();
        let g = make_uniform_grid(5, 0.0, 1.0).unwrap();
        let one = FunctionalSample::from_curves(&[Curve::zeros(g)]).unwrap();
        let r = depth_rank(&se, &one);
        assert_eq!(r.depths, vec![1.0]);
        assert_eq!(r.ranks, vec![1]);

        let (s, f) = f_family();
        let r = depth_rank(&se, &s);
        assert_eq!(r.ranks[1], 1);

        let s = s.concat(&FunctionalSample::from_curves(&[f.scale(1e3)]).unwrap()).unwrap();
        let r = depth_rank(&se, &s);
        assert_eq!(r.ranks[3], 4);
        let mut sorted = r.ranks.clone();
        sorted.sort();
        assert_eq!(sorted, vec![1, 2, 3, 4]);
    }

    #[test]
    fn test_rank_ties_by_index() {
        let r = DepthReport::from_depths(vec![0.5, 0.7, 0.5, 0.7], DepthMethod::HDepth, String::new());
        assert_eq!(r.ranks, vec![3, 1, 4, 2]);
    }

    #[test]
    fn test_outliers_examples() {
        let (s, f) = f_family();
        let s = s.concat(&FunctionalSample::from_curves(&[f.scale(1e3)]).unwrap()).unwrap();
        let r = depth_rank(&RadialKappa::se(1.0).unwrap(), &s);
        assert_eq!(outliers(&r, 0.3).unwrap(), vec![false, false, false, true]);
        // the α → 0⁺ limit: the quantile collapses onto the minimum depth
        assert_eq!(outliers(&r, 1e-20).unwrap(), vec![false; 4]);

        let flat = DepthReport::from_depths(vec![0.4; 5], DepthMethod::HDepth, String::new());
        assert_eq!(outliers(&flat, 0.5).unwrap(), vec![false; 5]);
        assert!(outliers(&flat, 0.0).is_err());
        assert!(outliers(&flat, 1.0).is_err());
    }

    #[test]
    fn test_quantile_type7() {
        assert_eq!(quantile_type7(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert!((quantile_type7(&[4.0, 1.0, 3.0, 2.0], 0.3) - 1.9).abs() < 1e-15);
    }

    #[test]
    fn test_h_mode_examples() {
        let se = RadialKappa::se(1.0).unwrap();
        let (s, _) = f_family();
        let (i, c, _) = h_mode(&se, &s);
        assert_eq!(i, 1);
        assert_eq!(c, s.curve(1));
        let one = s.select(&[2]).unwrap();
        assert_eq!(h_mode(&se, &one).0, 0);
    }

    #[test]
    fn test_pairwise_fast_path_agrees() {
        let g = make_uniform_grid(15, 0.0, 1.0).unwrap();
        let basis = cosine_basis(&g, 3);
        let c = CovOperator::from_spectrum(g.clone(), &[0.3, 0.1, 0.05], &basis).unwrap();
        let s = sample_gaussian(&GaussianMeasureSpec::centered(c), 100, 3).unwrap();
        let se = RadialKappa::se(1.0).unwrap();
        let fast = pairwise_se_depths(&se, &s);
        let slow = depth_rank(&se, &s).depths;
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn test_integrated_depth_degenerate() {
        let g = make_uniform_grid(11, 0.0, 1.0).unwrap();
        let basis = cosine_basis(&g, 2);
        let c = CovOperator::from_spectrum(g.clone(), &[1.0, 0.5], &basis).unwrap();
        let nu = GaussianMeasureSpec::centered(c.clone());
        let kappa1 = RadialKappa::se(1.0).unwrap();
        let x = Curve::from_fn(g.clone(), |t| t).unwrap();
        let single = FunctionalSample::from_curves(std::slice::from_ref(&x)).unwrap();
        assert_eq!(integrated_depth_mc(&kappa1, &nu, &single, &x, 25, 1).unwrap(), 1.0);
        assert_eq!(integrated_depth_closed(&c, &single, &x).unwrap(), 1.0);

        let point = GaussianMeasureSpec::centered(CovOperator::zero(g.clone()));
        let y = Curve::constant(g.clone(), 4.0).unwrap();
        assert_eq!(integrated_depth_mc(&kappa1, &point, &single, &y, 10, 2).unwrap(), 1.0);
    }

    #[test]
    fn test_integrated_closed_value() {
        let g = make_uniform_grid(31, 0.0, 1.0).unwrap();
        let basis = cosine_basis(&g, 2);
        let c = CovOperator::from_spectrum(g.clone(), &[1.0], &basis[1..]).unwrap();
        let phi = Curve::new(g.clone(), basis[1].clone()).unwrap();
        let x = phi.scale(3f64.sqrt());
        let s = FunctionalSample::from_curves(&[Curve::zeros(g.clone())]).unwrap();
        assert!((integrated_depth_closed(&c, &s, &x).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn test_integrated_closed_equals_imq_kme() {
        let g = make_uniform_grid(25, 0.0, 1.0).unwrap();
        let basis = cosine_basis(&g, 4);
        let c = CovOperator::from_spectrum(g.clone(), &[0.8, 0.4, 0.2, 0.1], &basis).unwrap();
        let s = sample_gaussian(&GaussianMeasureSpec::centered(c.clone()), 12, 9).unwrap();
        let k = KernelSpec::cov_sqrt(RadialKappa::imq(1.0).unwrap(), Arc::new(c.clone()));
        let e = EmbeddedMeasure::empirical(s.clone(), k).unwrap();
        for i in 0..4 {
            let x = s.curve(i).shift(0.1 * i as f64);
            let a = integrated_depth_closed(&c, &s, &x).unwrap();
            let b = kme_eval(&e, &x).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn test_level_set_diameter_examples() {
        let g = make_uniform_grid(21, 0.0, 1.0).unwrap();
        let basis = cosine_basis(&g, 2);
        let c = CovOperator::from_spectrum(g.clone(), &[1.0], &basis[1..]).unwrap();
        let spec = GaussianMeasureSpec::centered(c);
        let eps = (1.0 - (-0.5f64).exp()) / 2f64.sqrt();
        let t = gaussian_level_set_diameter(&spec, eps).unwrap();
        assert!((t - 2.0 * 2f64.sqrt()).abs() < 1e-10, "{t}");
        assert!(gaussian_level_set_diameter(&spec, 1e-300).unwrap() < 1e-140);
        let ratios: Vec<f64> = [1e-2, 1e-4, 1e-6]
            .iter()
            .map(|&e| gaussian_level_set_diameter(&spec, e).unwrap() / e.sqrt())
            .collect();
        assert!(ratios.iter().all(|r| *r < 10.0), "{ratios:?}");
        // the modal depth is 1/√2; the computed one may differ in the last ulp
        assert!(gaussian_level_set_diameter(&spec, 1.0 / 2f64.sqrt() * (1.0 + 1e-12)).is_err());
        assert!(gaussian_level_set_diameter(&spec, 0.75).is_err());
    }
}
