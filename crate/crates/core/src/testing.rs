//! MMD two-sample test, the discretized characteristic-function statistic
//! and the Gaussianity test.
//!
//! Replicates are independent tasks: replicate `b` draws from ChaCha stream
//! `b` of the user seed, so reports do not depend on the rayon schedule.

use std::cmp::Ordering;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{mmd2_u_indexed, pooled_gram, GaussianEmbedding};
use crate::error::{invalid, Error, Result};
use crate::funcspace::{sample_gaussian, same_grid, CovOperator, FunctionalSample, GaussianMeasureSpec};
use crate::kernels::{features_of, Kernel, KernelSpec, RadialFamily, RadialKappa};
use crate::rng::{derive_seed, stream};

pub const MIN_REPLICATES: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    MmdPermutation,
    EcfPermutation,
    GaussianityBootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub replicates: usize,
    pub seed: u64,
    pub method: TestMethod,
}

impl TestReport {
    fn from_replicates(
        statistic: f64,
        reps: &[f64],
        alpha: f64,
        seed: u64,
        method: TestMethod,
    ) -> Self {
        let exceed = reps.iter().filter(|r| **r >= statistic).count();
        let p_value = (1 + exceed) as f64 / (reps.len() + 1) as f64;
        TestReport {
            statistic,
            p_value,
            reject: p_value <= alpha,
            alpha,
            replicates: reps.len(),
            seed,
            method,
        }
    }
}

fn check_test_args(b: usize, alpha: f64) -> Result<()> {
    if b < MIN_REPLICATES {
        return Err(Error::InsufficientReplicates {
            min: MIN_REPLICATES,
            got: b,
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

/// Lexicographic order of the raw data, used to fix the pool order so the
/// test is invariant to which sample is passed first.
fn data_order(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

fn permutation_replicates(
    two_n: usize,
    b: usize,
    seed: u64,
    stat: impl Fn(&[usize], &[usize]) -> f64 + Sync,
) -> Vec<f64> {
    let n = two_n / 2;
    (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(seed, rep as u64);
            let mut idx: Vec<usize> = (0..two_n).collect();
            idx.shuffle(&mut rng);
            stat(&idx[..n], &idx[n..])
        })
        .collect()
}

/// Permutation test of `P = Q` based on the unbiased MMD² statistic.
pub fn two_sample_test<K: Kernel + ?Sized>(
    k: &K,
    x: &FunctionalSample,
    y: &FunctionalSample,
    b: usize,
    alpha: f64,
    seed: u64,
) -> Result<TestReport> {
    if x.n() != y.n() {
        return invalid(format!("samples must have equal sizes, got {} and {}", x.n(), y.n()));
    }
    if x.n() < 2 {
        return invalid("need at least two curves per sample");
    }
    if !same_grid(x.grid(), y.grid()) {
        return Err(Error::IncompatibleGrids);
    }
    check_test_args(b, alpha)?;
    let (first, second) = match data_order(x.as_flat(), y.as_flat()) {
        Ordering::Greater => (y, x),
        _ => (x, y),
    };
    let n = x.n();
    let g = pooled_gram(k, first, second)?;
    let xi: Vec<usize> = (0..n).collect();
    let yi: Vec<usize> = (n..2 * n).collect();
    let statistic = mmd2_u_indexed(&g, &xi, &yi);
    let reps = permutation_replicates(2 * n, b, seed, |a, c| mmd2_u_indexed(&g, a, c));
    Ok(TestReport::from_replicates(statistic, &reps, alpha, seed, TestMethod::MmdPermutation))
}

fn check_shapes(xd: &DMatrix<f64>, yd: &DMatrix<f64>) -> Result<()> {
    if xd.shape() != yd.shape() {
        return invalid(format!("shape mismatch: {:?} vs {:?}", xd.shape(), yd.shape()));
    }
    if xd.nrows() == 0 || xd.ncols() == 0 {
        return invalid("empty discretization");
    }
    Ok(())
}

fn euclid_se(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    let s: f64 = a
        .row(i)
        .iter()
        .zip(b.row(j).iter())
        .map(|(p, q)| {
            let d = p - q;
            d * d
        })
        .sum();
    (-0.5 * s).exp()
}

/// Weighted characteristic-function distance of two discretized samples
/// (rows are curves observed at `m` points), in its closed V-statistic form
/// with the Euclidean norm of `ℝ^m`.
pub fn ecf_two_sample_stat(xd: &DMatrix<f64>, yd: &DMatrix<f64>) -> Result<f64> {
    check_shapes(xd, yd)?;
    let n = xd.nrows();
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            sxx += euclid_se(xd, i, xd, j);
            sxy += euclid_se(xd, i, yd, j);
            syy += euclid_se(yd, i, yd, j);
        }
    }
    let nn = (n * n) as f64;
    Ok(sxx / nn - 2.0 * sxy / nn + syy / nn)
}

fn v_stat_indexed(g: &DMatrix<f64>, xi: &[usize], yi: &[usize]) -> f64 {
    let n = xi.len();
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            sxx += g[(xi[i], xi[j])];
            sxy += g[(xi[i], yi[j])];
            syy += g[(yi[i], yi[j])];
        }
    }
    let nn = (n * n) as f64;
    sxx / nn - 2.0 * sxy / nn + syy / nn
}

/// Permutation test built on [`ecf_two_sample_stat`].
pub fn ecf_two_sample_test(
    xd: &DMatrix<f64>,
    yd: &DMatrix<f64>,
    b: usize,
    alpha: f64,
    seed: u64,
) -> Result<TestReport> {
    check_shapes(xd, yd)?;
    check_test_args(b, alpha)?;
    let (first, second) = match data_order(xd.transpose().as_slice(), yd.transpose().as_slice()) {
        Ordering::Greater => (yd, xd),
        _ => (xd, yd),
    };
    let n = xd.nrows();
    let mut pool = DMatrix::zeros(2 * n, xd.ncols());
    pool.rows_mut(0, n).copy_from(first);
    pool.rows_mut(n, n).copy_from(second);
    let rows: Vec<Vec<f64>> = (0..2 * n)
        .into_par_iter()
        .map(|i| (0..2 * n).map(|j| euclid_se(&pool, i, &pool, j)).collect())
        .collect();
    let g = DMatrix::from_fn(2 * n, 2 * n, |i, j| rows[i][j]);
    let xi: Vec<usize> = (0..n).collect();
    let yi: Vec<usize> = (n..2 * n).collect();
    let statistic = v_stat_indexed(&g, &xi, &yi);
    let reps = permutation_replicates(2 * n, b, seed, |a, c| v_stat_indexed(&g, a, c));
    Ok(TestReport::from_replicates(statistic, &reps, alpha, seed, TestMethod::EcfPermutation))
}

/// SE-C½ kernel with unit bandwidth for the given weight operator.
pub fn gaussianity_kernel(c_weight: &CovOperator) -> KernelSpec {
    KernelSpec::cov_sqrt(
        RadialKappa::unnormalized(RadialFamily::Se, 1.0).expect("unit bandwidth"),
        Arc::new(c_weight.clone()),
    )
}

/// `T_n = n⁻² ΣΣ k(Xᵢ,Xⱼ) − 2n⁻¹ Σ Φ_k N(Xᵢ) + ‖Φ_k N‖²` with
/// `N = N(m_n, Σ_n)` fitted to the sample.
pub fn gaussianity_statistic(s: &FunctionalSample, k: &KernelSpec) -> Result<f64> {
    if k.family() != RadialFamily::Se {
        return Err(Error::UnsupportedClosedForm(
            "the Gaussianity statistic needs an SE kernel".into(),
        ));
    }
    let fitted = GaussianMeasureSpec::fit(s);
    let emb = GaussianEmbedding::new(&fitted, k)?;
    let feats = features_of(k, s)?;
    let grid = s.grid();
    let n = s.n();
    let mut within = 0.0;
    for a in &feats {
        for b in &feats {
            within += k.eval_features(grid, a, b);
        }
    }
    let cross: f64 = s.rows().map(|x| emb.eval_values(x)).sum();
    let nf = n as f64;
    Ok(within / (nf * nf) - 2.0 * cross / nf + emb.sq_norm())
}

/// Gaussianity test with a parametric bootstrap null: each replicate draws
/// `n` curves from the fitted `N(m_n, Σ_n)` and refits before recomputing the
/// statistic.
pub fn gaussianity_test(
    s: &FunctionalSample,
    c_weight: &CovOperator,
    b: usize,
    alpha: f64,
    seed: u64,
) -> Result<TestReport> {
    let n = s.n();
    if n < 3 {
        return invalid(format!("the Gaussianity test needs at least 3 curves, got {n}"));
    }
    if !same_grid(s.grid(), c_weight.grid()) {
        return Err(Error::IncompatibleGrids);
    }
    check_test_args(b, alpha)?;
    let k = gaussianity_kernel(c_weight);
    let statistic = gaussianity_statistic(s, &k)?;
    let fitted = GaussianMeasureSpec::fit(s);
    fitted.cov.eigenpairs()?;
    let reps = (0..b)
        .into_par_iter()
        .map(|rep| {
            let draw = sample_gaussian(&fitted, n, derive_seed(seed, &[rep as u64]))?;
            gaussianity_statistic(&draw, &k)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(TestReport::from_replicates(
        statistic,
        &reps,
        alpha,
        seed,
        TestMethod::GaussianityBootstrap,
    ))
}

/// Empirical covariance rescaled to unit trace; the default weight operator.
pub fn unit_trace_cov(s: &FunctionalSample) -> Result<CovOperator> {
    let c = crate::funcspace::empirical_cov(s);
    let tr = c.trace();
    if !(tr > 0.0) {
        return Err(Error::InvalidOperator("sample covariance has zero trace".into()));
    }
    c.scaled(1.0 / tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{mmd2_spectral_1d, mmd2_v, DiscreteMeasure};
    use crate::funcspace::{cosine_basis, make_uniform_grid, Curve, Grid};

    fn fixture(shift: f64) -> GaussianMeasureSpec {
        let g = make_uniform_grid(21, 0.0, 1.0).unwrap();
        let basis = cosine_basis(&g, 3);
        let c = CovOperator::from_spectrum(g.clone(), &[0.3, 0.15, 0.05], &basis).unwrap();
        GaussianMeasureSpec::new(Curve::constant(g, shift).unwrap(), c).unwrap()
    }

    #[test]
    fn test_p_value_formula() {
        let r = TestReport::from_replicates(1.0, &[0.5, 1.0, 2.0, 0.1], 0.05, 0, TestMethod::MmdPermutation);
        assert!((r.p_value - 3.0 / 5.0).abs() < 1e-15);
        assert!(!r.reject);
        let r = TestReport::from_replicates(9.0, &[0.0; 19], 0.05, 0, TestMethod::MmdPermutation);
        assert!((r.p_value - 0.05).abs() < 1e-15);
        assert!(r.reject);
    }

    #[test]
    fn test_two_sample_errors() {
        let k = KernelSpec::se_unit();
        let x = sample_gaussian(&fixture(0.0), 5, 1).unwrap();
        let y = sample_gaussian(&fixture(0.0), 4, 2).unwrap();
        assert!(matches!(two_sample_test(&k, &x, &y, 99, 0.05, 0), Err(Error::InvalidArgument(_))));
        assert_eq!(
            two_sample_test(&k, &x, &x, 18, 0.05, 0),
            Err(Error::InsufficientReplicates { min: 19, got: 18 })
        );
    }

    #[test]
    fn test_identical_samples_never_reject() {
        let k = KernelSpec::se_unit();
        let x = sample_gaussian(&fixture(0.0), 20, 1).unwrap();
        for seed in 0..20 {
            let r = two_sample_test(&k, &x, &x, 99, 0.05, seed).unwrap();
            assert_eq!(r.statistic, 0.0);
            assert!(r.p_value > 0.05);
        }
    }

    #[test]
    fn test_mean_shift_detected() {
        let k = KernelSpec::se_unit();
        let x = sample_gaussian(&fixture(0.0), 50, 1).unwrap();
        let y = sample_gaussian(&fixture(1.0), 50, 2).unwrap();
        let r = two_sample_test(&k, &x, &y, 199, 0.05, 3).unwrap();
        assert!(r.reject);
        assert!((r.p_value - 1.0 / 200.0).abs() < 1e-15);
    }

    #[test]
    fn test_two_sample_exchangeable() {
        let k = KernelSpec::se_unit();
        let x = sample_gaussian(&fixture(0.0), 15, 1).unwrap();
        let y = sample_gaussian(&fixture(0.2), 15, 2).unwrap();
        let a = two_sample_test(&k, &x, &y, 99, 0.05, 8).unwrap();
        let b = two_sample_test(&k, &y, &x, 99, 0.05, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn test_ecf_examples() {
        let x = DMatrix::from_row_slice(2, 3, &[0.1, 0.2, 0.3, -1.0, 0.0, 2.0]);
        assert!(ecf_two_sample_stat(&x, &x).unwrap().abs() < 1e-12);
        let a = DMatrix::from_row_slice(1, 3, &[0.5, 0.5, 0.5]);
        let b = DMatrix::from_row_slice(1, 3, &[0.5, 1.5, 0.5]);
        let v = ecf_two_sample_stat(&a, &b).unwrap();
        assert!((v - 2.0 * (1.0 - (-0.5f64).exp())).abs() < 1e-14);
        assert!(ecf_two_sample_stat(&x, &a).is_err());
    }

    #[test]
    fn test_ecf_scalar_matches_spectral_form() {
        let xa = [0.3, -1.2, 0.8, 2.0];
        let ya = [0.1, 0.5, -0.4, 1.1];
        let xd = DMatrix::from_column_slice(4, 1, &xa);
        let yd = DMatrix::from_column_slice(4, 1, &ya);
        let p = DiscreteMeasure::uniform(xa.to_vec()).unwrap();
        let q = DiscreteMeasure::uniform(ya.to_vec()).unwrap();
        let spectral = mmd2_spectral_1d(1.0, &p, &q, 4001).unwrap();
        assert!((ecf_two_sample_stat(&xd, &yd).unwrap() - spectral).abs() < 1e-9);
    }

    #[test]
    fn test_ecf_matches_unit_weight_mmd() {
        let x = sample_gaussian(&fixture(0.0), 6, 1).unwrap();
        let y = sample_gaussian(&fixture(0.3), 6, 2).unwrap();
        let m = x.m();
        let xd = DMatrix::from_fn(6, m, |i, j| x.row(i)[j]);
        let yd = DMatrix::from_fn(6, m, |i, j| y.row(i)[j]);
        let pts: Vec<f64> = (0..m).map(|i| i as f64).collect();
        let grid = Arc::new(Grid::with_weights(pts, vec![1.0; m]).unwrap());
        let xs = FunctionalSample::from_flat(grid.clone(), x.as_flat().to_vec()).unwrap();
        let ys = FunctionalSample::from_flat(grid, y.as_flat().to_vec()).unwrap();
        let v = mmd2_v(&KernelSpec::se_unit(), &xs, &ys).unwrap();
        assert!((v - ecf_two_sample_stat(&xd, &yd).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn test_ecf_test_runs() {
        let x = sample_gaussian(&fixture(0.0), 50, 1).unwrap();
        let y = sample_gaussian(&fixture(1.0), 50, 2).unwrap();
        // a coarse 5-point discretization: with many points the unweighted
        // Euclidean distances are so large that every kernel value vanishes
        let cols = [0, 5, 10, 15, 20];
        let xd = DMatrix::from_fn(50, cols.len(), |i, j| x.row(i)[cols[j]]);
        let yd = DMatrix::from_fn(50, cols.len(), |i, j| y.row(i)[cols[j]]);
        let r = ecf_two_sample_test(&xd, &yd, 99, 0.05, 1).unwrap();
        assert!(r.reject);
        assert_eq!(r, ecf_two_sample_test(&yd, &xd, 99, 0.05, 1).unwrap());
    }

    #[test]
    fn test_gaussianity_errors() {
        let s = sample_gaussian(&fixture(0.0), 2, 1).unwrap();
        let w = fixture(0.0).cov;
        assert!(gaussianity_test(&s, &w, 99, 0.05, 0).is_err());
        let s = sample_gaussian(&fixture(0.0), 10, 1).unwrap();
        assert!(matches!(
            gaussianity_test(&s, &w, 5, 0.05, 0),
            Err(Error::InsufficientReplicates { .. })
        ));
    }

    #[test]
    fn test_gaussianity_statistic_nonnegative() {
        let s = sample_gaussian(&fixture(0.0), 30, 4).unwrap();
        let k = gaussianity_kernel(&unit_trace_cov(&s).unwrap());
        let t = gaussianity_statistic(&s, &k).unwrap();
        assert!(t >= -1e-12);
    }
}
