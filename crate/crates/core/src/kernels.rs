//! Radial kernel catalog and Gram matrices.
//!
//! Only the squared-exponential and inverse multiquadric profiles are
//! offered: both have `κ(√·)` completely monotone, so every kernel built from
//! them (after any linear transform) is positive definite and characteristic.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::funcspace::{quad_form_values, same_grid, CovOperator, Curve, FunctionalSample, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadialFamily {
    /// `e^{−t²/2}`
    Se,
    /// `(t² + 1)^{−1/2}`
    Imq,
}

impl RadialFamily {
    #[inline]
    fn base(self, t: f64) -> f64 {
        match self {
            RadialFamily::Se => (-0.5 * t * t).exp(),
            RadialFamily::Imq => 1.0 / (t * t + 1.0).sqrt(),
        }
    }

    #[inline]
    fn base_sq(self, t2: f64) -> f64 {
        match self {
            RadialFamily::Se => (-0.5 * t2).exp(),
            RadialFamily::Imq => 1.0 / (t2 + 1.0).sqrt(),
        }
    }
}

impl fmt::Display for RadialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialFamily::Se => f.write_str("SE"),
            RadialFamily::Imq => f.write_str("IMQ"),
        }
    }
}

/// Radial profile `κ_h(t) = c·κ(t/h)`, with `c = h^{−1}` when normalized
/// and `c = 1` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialKappa {
    pub family: RadialFamily,
    pub bandwidth: f64,
    pub normalized: bool,
}

impl RadialKappa {
    /// Bandwidth-normalized profile `h^{−1} κ(·/h)`.
    pub fn new(family: RadialFamily, bandwidth: f64) -> Result<Self> {
        Self::with_normalization(family, bandwidth, true)
    }

    /// Plain rescaling `κ(·/h)`, so that `κ(0) = 1`.
    pub fn unnormalized(family: RadialFamily, bandwidth: f64) -> Result<Self> {
        Self::with_normalization(family, bandwidth, false)
    }

    pub fn with_normalization(family: RadialFamily, bandwidth: f64, normalized: bool) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return invalid(format!("bandwidth must be positive and finite, got {bandwidth}"));
        }
        Ok(RadialKappa {
            family,
            bandwidth,
            normalized,
        })
    }

    pub fn se(bandwidth: f64) -> Result<Self> {
        Self::new(RadialFamily::Se, bandwidth)
    }

    pub fn imq(bandwidth: f64) -> Result<Self> {
        Self::new(RadialFamily::Imq, bandwidth)
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        if self.normalized {
            1.0 / self.bandwidth
        } else {
            1.0
        }
    }

    pub fn at_zero(&self) -> f64 {
        self.scale()
    }

    /// `κ_h(t)` for `t ≥ 0`; no argument check.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.scale() * self.family.base(t / self.bandwidth)
    }

    /// `κ_h(√s)` from a squared distance.
    #[inline]
    pub fn eval_sq(&self, s: f64) -> f64 {
        let h = self.bandwidth;
        self.scale() * self.family.base_sq(s / (h * h))
    }
}

impl fmt::Display for RadialKappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}(h={}{})",
            self.family,
            self.bandwidth,
            if self.normalized { ",normalized" } else { "" }
        )
    }
}

pub fn kappa_eval(spec: &RadialKappa, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return invalid(format!("radial argument must be nonnegative, got {t}"));
    }
    Ok(spec.eval(t))
}

/// Linear map applied to curves before the radial profile.
#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    /// `T = γ^{−1} I`.
    Identity { scale: f64 },
    /// `T = C^{1/2}`; the square root is never formed, `‖C^{1/2}d‖² = ⟨Cd, d⟩`.
    CovSqrt(Arc<CovOperator>),
}

/// `k(x, y) = κ_h(‖T x − T y‖)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub kappa: RadialKappa,
    pub transform: Transform,
}

impl KernelSpec {
    pub fn identity(kappa: RadialKappa) -> Self {
        KernelSpec {
            kappa,
            transform: Transform::Identity { scale: 1.0 },
        }
    }

    pub fn scaled(kappa: RadialKappa, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return invalid(format!("identity scale must be positive, got {gamma}"));
        }
        Ok(KernelSpec {
            kappa,
            transform: Transform::Identity { scale: gamma },
        })
    }

    pub fn cov_sqrt(kappa: RadialKappa, c: Arc<CovOperator>) -> Self {
        KernelSpec {
            kappa,
            transform: Transform::CovSqrt(c),
        }
    }

    /// Unnormalized SE-I with unit bandwidth, `e^{−‖x−y‖²/2}`.
    pub fn se_unit() -> Self {
        Self::identity(RadialKappa::unnormalized(RadialFamily::Se, 1.0).expect("unit bandwidth"))
    }

    pub fn family(&self) -> RadialFamily {
        self.kappa.family
    }

    /// `κ(0)`, the kernel's constant diagonal.
    pub fn at_zero(&self) -> f64 {
        self.kappa.at_zero()
    }

    /// Squared transformed distance `‖T x − T y‖²` (bandwidth not applied).
    pub fn sq_distance(&self, grid: &Grid, x: &[f64], y: &[f64]) -> f64 {
        match &self.transform {
            Transform::Identity { scale } => {
                let d = grid.sq_dist(x, y);
                if *scale == 1.0 {
                    d
                } else {
                    d / (scale * scale)
                }
            }
            Transform::CovSqrt(c) => {
                let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                quad_form_values(c, &d).max(0.0)
            }
        }
    }

    /// Coordinates `z` with `‖z_x − z_y‖² = ‖T x − T y‖²`.
    ///
    /// For the operator transform, `z_j = √λⱼ ⟨eⱼ, x⟩` in the eigenbasis of `C`.
    fn cov_features(c: &CovOperator, x: &[f64]) -> Result<Vec<f64>> {
        let eig = c.eigenpairs()?;
        let grid = c.grid();
        Ok((0..eig.rank())
            .map(|j| eig.values[j].sqrt() * grid.inner(eig.function(j), x))
            .collect())
    }

    pub fn describe(&self) -> String {
        match &self.transform {
            Transform::Identity { scale } if *scale == 1.0 => format!("{}-I {}", self.kappa.family, self.kappa),
            Transform::Identity { scale } => format!("{}-I/{} {}", self.kappa.family, scale, self.kappa),
            Transform::CovSqrt(_) => format!("{}-C½ {}", self.kappa.family, self.kappa),
        }
    }
}

/// A bivariate function on curves, evaluated through grid values.
///
/// `features`/`eval_features` give a batch path used by [`gram`]; the default
/// features are the raw values, which makes the batch path identical to
/// [`Kernel::eval_values`].
pub trait Kernel: Sync {
    fn check_grid(&self, grid: &Arc<Grid>) -> Result<()>;

    fn eval_values(&self, grid: &Grid, x: &[f64], y: &[f64]) -> f64;

    fn features(&self, _grid: &Grid, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }

    fn eval_features(&self, grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
        self.eval_values(grid, a, b)
    }
}

impl Kernel for KernelSpec {
    fn check_grid(&self, grid: &Arc<Grid>) -> Result<()> {
        match &self.transform {
            Transform::CovSqrt(c) if !same_grid(c.grid(), grid) => Err(Error::IncompatibleGrids),
            _ => Ok(()),
        }
    }

    #[inline]
    fn eval_values(&self, grid: &Grid, x: &[f64], y: &[f64]) -> f64 {
        match &self.transform {
            Transform::Identity { scale } => {
                let t = grid.sq_dist(x, y).sqrt();
                let t = if *scale == 1.0 { t } else { t / scale };
                self.kappa.eval(t)
            }
            Transform::CovSqrt(_) => self.kappa.eval(self.sq_distance(grid, x, y).sqrt()),
        }
    }

    fn features(&self, _grid: &Grid, x: &[f64]) -> Result<Vec<f64>> {
        match &self.transform {
            Transform::Identity { .. } => Ok(x.to_vec()),
            Transform::CovSqrt(c) => Self::cov_features(c, x),
        }
    }

    #[inline]
    fn eval_features(&self, grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
        match &self.transform {
            Transform::Identity { .. } => self.eval_values(grid, a, b),
            Transform::CovSqrt(_) => {
                let s: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(p, q)| {
                        let d = p - q;
                        d * d
                    })
                    .sum();
                self.kappa.eval(s.sqrt())
            }
        }
    }
}

/// `k(x, y)` for two curves.
pub fn kernel_eval<K: Kernel + ?Sized>(k: &K, x: &Curve, y: &Curve) -> Result<f64> {
    if !same_grid(x.grid(), y.grid()) {
        return Err(Error::IncompatibleGrids);
    }
    k.check_grid(x.grid())?;
    Ok(k.eval_values(x.grid(), x.values(), y.values()))
}

pub(crate) fn features_of<K: Kernel + ?Sized>(k: &K, s: &FunctionalSample) -> Result<Vec<Vec<f64>>> {
    s.rows().map(|r| k.features(s.grid(), r)).collect()
}

/// Gram matrix `G[i][j] = k(Aᵢ, Bⱼ)`, filled row-parallel.
pub fn gram<K: Kernel + ?Sized>(k: &K, a: &FunctionalSample, b: &FunctionalSample) -> Result<DMatrix<f64>> {
    if !same_grid(a.grid(), b.grid()) {
        return Err(Error::IncompatibleGrids);
    }
    k.check_grid(a.grid())?;
    let fa = features_of(k, a)?;
    let fb = if std::ptr::eq(a, b) { fa.clone() } else { features_of(k, b)? };
    Ok(gram_from_features(k, a.grid(), &fa, &fb))
}

pub(crate) fn gram_from_features<K: Kernel + ?Sized>(
    k: &K,
    grid: &Grid,
    fa: &[Vec<f64>],
    fb: &[Vec<f64>],
) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = fa
        .par_iter()
        .map(|x| fb.iter().map(|y| k.eval_features(grid, x, y)).collect())
        .collect();
    DMatrix::from_fn(fa.len(), fb.len(), |i, j| rows[i][j])
}

/// Outcome of [`check_pd`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdDiagnostic {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub is_psd: bool,
}

/// Numerical positive semi-definiteness check of a symmetric matrix.
pub fn check_pd(g: &DMatrix<f64>) -> Result<PdDiagnostic> {
    if g.nrows() != g.ncols() {
        return invalid(format!("matrix is {}x{}, not square", g.nrows(), g.ncols()));
    }
    if g.nrows() == 0 {
        return invalid("matrix is empty");
    }
    let eig = SymmetricEigen::new(g.clone());
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    Ok(PdDiagnostic {
        min_eigenvalue: min,
        max_eigenvalue: max,
        is_psd: min >= -1e-8 * max.max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{cosine_basis, make_uniform_grid};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_sample(seed: u64, n: usize, m: usize) -> FunctionalSample {
        let g = make_uniform_grid(m, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| (0..m).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        FunctionalSample::new(g, rows).unwrap()
    }

    #[test]
    fn test_kappa_examples() {
        let se = RadialKappa::se(1.0).unwrap();
        assert_eq!(kappa_eval(&se, 0.0).unwrap(), 1.0);
        let imq = RadialKappa::imq(1.0).unwrap();
        assert!((kappa_eval(&imq, 3f64.sqrt()).unwrap() - 0.5).abs() < 1e-15);
        let se2 = RadialKappa::se(2.0).unwrap();
        assert_eq!(kappa_eval(&se2, 0.0).unwrap(), 0.5);
        assert!(matches!(kappa_eval(&se, -1.0), Err(Error::InvalidArgument(_))));
        assert!(RadialKappa::se(0.0).is_err());
    }

    #[test]
    fn test_unnormalized_kappa() {
        let k = RadialKappa::unnormalized(RadialFamily::Se, 3.0).unwrap();
        assert_eq!(k.at_zero(), 1.0);
        assert!((k.eval(3.0) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn test_kernel_eval_examples() {
        let g = make_uniform_grid(11, 0.0, 1.0).unwrap();
        let zero = Curve::zeros(g.clone());
        let one = Curve::constant(g.clone(), 1.0).unwrap();
        let se = KernelSpec::identity(RadialKappa::se(1.0).unwrap());
        assert_eq!(kernel_eval(&se, &one, &one).unwrap(), 1.0);
        assert!((kernel_eval(&se, &zero, &one).unwrap() - 0.606_530_659_712_633_4).abs() < 1e-12);

        let basis = cosine_basis(&g, 2);
        let c = CovOperator::from_spectrum(g.clone(), &[1.0], &[basis[1].clone()]).unwrap();
        let imq = KernelSpec::cov_sqrt(RadialKappa::imq(1.0).unwrap(), Arc::new(c));
        let phi = Curve::new(g.clone(), basis[1].clone()).unwrap();
        let v = kernel_eval(&imq, &phi, &zero).unwrap();
        assert!((v - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn test_kernel_eval_grid_mismatch() {
        let a = Curve::zeros(make_uniform_grid(4, 0.0, 1.0).unwrap());
        let b = Curve::zeros(make_uniform_grid(5, 0.0, 1.0).unwrap());
        let se = KernelSpec::se_unit();
        assert_eq!(kernel_eval(&se, &a, &b), Err(Error::IncompatibleGrids));
    }

    #[test]
    fn test_gram_examples() {
        let s = random_sample(1, 1, 9);
        let se = KernelSpec::identity(RadialKappa::se(2.0).unwrap());
        let g = gram(&se, &s, &s).unwrap();
        assert_eq!(g.shape(), (1, 1));
        assert_eq!(g[(0, 0)], 0.5);

        let s = random_sample(2, 5, 9);
        let se = KernelSpec::identity(RadialKappa::se(1.0).unwrap());
        let g = gram(&se, &s, &s).unwrap();
        assert_eq!(g, g.transpose());
        for i in 0..5 {
            for j in 0..5 {
                let direct = kernel_eval(&se, &s.curve(i), &s.curve(j)).unwrap();
                assert_eq!(g[(i, j)], direct);
            }
        }
    }

    #[test]
    fn test_gram_cov_features_match_direct() {
        let s = random_sample(3, 6, 15);
        let c = crate::funcspace::empirical_cov(&random_sample(4, 20, 15));
        let k = KernelSpec::cov_sqrt(RadialKappa::imq(0.7).unwrap(), Arc::new(c));
        let g = gram(&k, &s, &s).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let direct = kernel_eval(&k, &s.curve(i), &s.curve(j)).unwrap();
                assert!((g[(i, j)] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn test_check_pd_examples() {
        let d = check_pd(&DMatrix::identity(3, 3)).unwrap();
        assert!(d.is_psd);
        assert!((d.min_eigenvalue - 1.0).abs() < 1e-15);

        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let d = check_pd(&m).unwrap();
        assert!(!d.is_psd);
        assert!((d.min_eigenvalue + 1.0).abs() < 1e-12);

        assert!(check_pd(&DMatrix::zeros(2, 3)).is_err());

        let s = random_sample(5, 10, 21);
        let g = gram(&KernelSpec::se_unit(), &s, &s).unwrap();
        assert!(check_pd(&g).unwrap().is_psd);
    }

    proptest! {
        #[test]
        fn prop_symmetry_diagonal_bound(seed in 0u64..2000, h in 0.2..5.0f64, imq in any::<bool>()) {
            let s = random_sample(seed, 3, 12);
            let fam = if imq { RadialFamily::Imq } else { RadialFamily::Se };
            let k = KernelSpec::identity(RadialKappa::new(fam, h).unwrap());
            let (x, y) = (s.curve(0), s.curve(1));
            let kxy = kernel_eval(&k, &x, &y).unwrap();
            prop_assert_eq!(kxy.to_bits(), kernel_eval(&k, &y, &x).unwrap().to_bits());
            prop_assert_eq!(kernel_eval(&k, &x, &x).unwrap(), k.at_zero());
            prop_assert!(kxy.abs() <= k.at_zero());
        }

        #[test]
        fn prop_monotone_decay(seed in 0u64..2000, t1 in 0.0..4.0f64, dt in 0.0..4.0f64) {
            let s = random_sample(seed, 2, 12);
            let x = s.curve(0);
            let d = s.curve(1);
            let d = d.scale(1.0 / crate::funcspace::l2_norm(&d));
            for fam in [RadialFamily::Se, RadialFamily::Imq] {
                let k = KernelSpec::identity(RadialKappa::new(fam, 1.3).unwrap());
                let a = kernel_eval(&k, &x, &x.axpy(t1, &d).unwrap()).unwrap();
                let b = kernel_eval(&k, &x, &x.axpy(t1 + dt, &d).unwrap()).unwrap();
                prop_assert!(b <= a + 1e-15);
            }
        }

        #[test]
        fn prop_bandwidth_identity(t in 0.0..20.0f64, h in 0.05..20.0f64) {
            for fam in [RadialFamily::Se, RadialFamily::Imq] {
                let kh = RadialKappa::new(fam, h).unwrap();
                let k1 = RadialKappa::new(fam, 1.0).unwrap();
                prop_assert_eq!(kh.eval(t), (1.0 / h) * k1.eval(t / h));
            }
        }

        #[test]
        fn prop_gram_psd(seed in 0u64..500) {
            let s = random_sample(seed, 10, 16);
            let c = crate::funcspace::empirical_cov(&random_sample(seed + 1, 8, 16));
            let kernels = [
                KernelSpec::identity(RadialKappa::se(1.0).unwrap()),
                KernelSpec::identity(RadialKappa::imq(0.5).unwrap()),
                KernelSpec::cov_sqrt(RadialKappa::se(1.0).unwrap(), Arc::new(c.clone())),
                KernelSpec::cov_sqrt(RadialKappa::imq(2.0).unwrap(), Arc::new(c)),
            ];
            for k in &kernels {
                let g = gram(k, &s, &s).unwrap();
                prop_assert!(check_pd(&g).unwrap().is_psd);
            }
        }
    }
}
