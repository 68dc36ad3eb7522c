//! Kernel mean embeddings and MMD² estimators.
//!
//! The empirical embedding `Φ_k P_n(x) = n⁻¹ Σ k(x, Xᵢ)` works for any catalog
//! kernel. For Gaussian measures and SE-type kernels the embedding has a
//! closed form: with `T` the kernel's linear map and `X ~ N(m, Σ)`, the
//! pushforward `T X` is `N(T m, Σ̃)` with `Σ̃ = T Σ T*`, and
//!
//! ```text
//! Φ_k N(x) = κ(0) · det(I + Σ̃)^{−1/2} · exp(−½ ⟨(I + Σ̃)^{−1} T(x−m), T(x−m)⟩)
//! ‖Φ_k N‖² = κ(0) · det(I + 2Σ̃)^{−1/2}
//! ```
//!
//! Determinants are finite products over the eigenvalues of `Σ̃` retained on
//! the grid.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::funcspace::{same_grid, Curve, FunctionalSample, GaussianMeasureSpec, Grid};
use crate::kernels::{features_of, gram_from_features, Kernel, KernelSpec, RadialFamily, Transform};

const RETAIN_REL_TOL: f64 = 1e-12;

/// Precomputed closed-form embedding of `N(m, Σ)` under an SE-type kernel.
#[derive(Debug, Clone)]
pub struct GaussianEmbedding {
    grid: Arc<Grid>,
    mean: Vec<f64>,
    /// Rows are the eigen-directions of `Σ̃`, composed with `T` (bandwidth included).
    proj: DMatrix<f64>,
    /// `1 / (1 + μ_k)` per eigenvalue `μ_k` of `Σ̃`.
    shrink: Vec<f64>,
    /// Eigenvalues of `Σ̃` after clamping.
    spectrum: Vec<f64>,
    scale: f64,
}

impl GaussianEmbedding {
    pub fn new(g: &GaussianMeasureSpec, k: &KernelSpec) -> Result<Self> {
        if k.family() != RadialFamily::Se {
            return Err(Error::UnsupportedClosedForm(format!(
                "Gaussian embeddings have a closed form only for SE kernels, got {}",
                k.family()
            )));
        }
        k.check_grid(g.grid())?;
        let grid = g.grid().clone();
        let h = k.kappa.bandwidth;
        let map = transform_matrix(k, &grid)? / h;
        let cov = g.cov.kernel_matrix();
        let mut tilde = &map * cov * map.transpose();
        tilde = 0.5 * (&tilde + tilde.transpose());
        let eig = SymmetricEigen::new(tilde);
        let mu_max = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
        let spectrum: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&mu| if mu > RETAIN_REL_TOL * mu_max && mu > 0.0 { mu } else { 0.0 })
            .collect();
        let shrink = spectrum.iter().map(|mu| 1.0 / (1.0 + mu)).collect();
        let proj = eig.eigenvectors.transpose() * map;
        Ok(GaussianEmbedding {
            grid,
            mean: g.mean.values().to_vec(),
            proj,
            shrink,
            spectrum,
            scale: k.at_zero(),
        })
    }

    /// Eigenvalues of `Σ̃` (unordered, clamped).
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// `log det(I + c Σ̃)` as a finite product.
    fn log_det(&self, c: f64) -> f64 {
        self.spectrum.iter().map(|mu| (c * mu).ln_1p()).sum()
    }

    /// `Φ_k N(x)` from grid values.
    pub fn eval_values(&self, x: &[f64]) -> f64 {
        let d = DVector::from_iterator(x.len(), x.iter().zip(&self.mean).map(|(a, b)| a - b));
        let q = &self.proj * d;
        let quad: f64 = q.iter().zip(&self.shrink).map(|(qk, s)| qk * qk * s).sum();
        self.scale * (-0.5 * self.log_det(1.0) - 0.5 * quad).exp()
    }

    pub fn eval(&self, x: &Curve) -> Result<f64> {
        if !same_grid(&self.grid, x.grid()) {
            return Err(Error::IncompatibleGrids);
        }
        Ok(self.eval_values(x.values()))
    }

    /// `‖Φ_k N‖²_k = E k(X, Y)` for independent `X, Y ~ N`.
    pub fn sq_norm(&self) -> f64 {
        self.scale * (-0.5 * self.log_det(2.0)).exp()
    }

    /// `det(I + Σ̃)^{−1/2}`.
    pub fn det_factor(&self) -> f64 {
        (-0.5 * self.log_det(1.0)).exp()
    }
}

/// Matrix `M` acting on grid values with `‖M(x − y)‖² = ‖T x − T y‖²`.
fn transform_matrix(k: &KernelSpec, grid: &Grid) -> Result<DMatrix<f64>> {
    let m = grid.len();
    match &k.transform {
        Transform::Identity { scale } => {
            let diag = DVector::from_iterator(m, grid.weights().iter().map(|w| w.sqrt() / scale));
            Ok(DMatrix::from_diagonal(&diag))
        }
        Transform::CovSqrt(c) => {
            let eig = c.eigenpairs()?;
            let r = eig.rank();
            let w = grid.weights();
            Ok(DMatrix::from_fn(r, m, |j, i| eig.values[j].sqrt() * w[i] * eig.function(j)[i]))
        }
    }
}

/// The measure behind a kernel mean embedding.
#[derive(Debug, Clone)]
pub enum MeasureKind {
    Empirical(FunctionalSample),
    Gaussian(GaussianMeasureSpec),
}

/// `Φ_k P` for an empirical or Gaussian `P`.
#[derive(Debug, Clone)]
pub struct EmbeddedMeasure {
    kind: MeasureKind,
    kernel: KernelSpec,
    closed: Option<GaussianEmbedding>,
}

impl EmbeddedMeasure {
    pub fn empirical(s: FunctionalSample, kernel: KernelSpec) -> Result<Self> {
        kernel.check_grid(s.grid())?;
        Ok(EmbeddedMeasure {
            kind: MeasureKind::Empirical(s),
            kernel,
            closed: None,
        })
    }

    /// Closed-form embedding; requires an SE-family kernel.
    pub fn gaussian(g: GaussianMeasureSpec, kernel: KernelSpec) -> Result<Self> {
        let closed = GaussianEmbedding::new(&g, &kernel)?;
        Ok(EmbeddedMeasure {
            kind: MeasureKind::Gaussian(g),
            kernel,
            closed: Some(closed),
        })
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn grid(&self) -> &Arc<Grid> {
        match &self.kind {
            MeasureKind::Empirical(s) => s.grid(),
            MeasureKind::Gaussian(g) => g.grid(),
        }
    }

    fn eval_values(&self, x: &[f64]) -> f64 {
        match (&self.kind, &self.closed) {
            (_, Some(closed)) => closed.eval_values(x),
            (MeasureKind::Empirical(s), None) => {
                let grid = s.grid();
                let total: f64 = s.rows().map(|xi| self.kernel.eval_values(grid, x, xi)).sum();
                total / s.n() as f64
            }
            (MeasureKind::Gaussian(_), None) => unreachable!("Gaussian embeddings are built closed"),
        }
    }
}

/// `Φ_k P(x)`.
pub fn kme_eval(e: &EmbeddedMeasure, x: &Curve) -> Result<f64> {
    if !same_grid(e.grid(), x.grid()) {
        return Err(Error::IncompatibleGrids);
    }
    Ok(e.eval_values(x.values()))
}

/// `‖Φ_k N_{m,Σ}‖²_k` in closed form (SE family only).
pub fn kme_sq_norm_gaussian(g: &GaussianMeasureSpec, k: &KernelSpec) -> Result<f64> {
    Ok(GaussianEmbedding::new(g, k)?.sq_norm())
}

fn check_pair(x: &FunctionalSample, y: &FunctionalSample) -> Result<()> {
    if x.n() != y.n() {
        return invalid(format!("samples must have equal sizes, got {} and {}", x.n(), y.n()));
    }
    if !same_grid(x.grid(), y.grid()) {
        return Err(Error::IncompatibleGrids);
    }
    Ok(())
}

/// Gram matrix of `X ++ Y`.
pub(crate) fn pooled_gram<K: Kernel + ?Sized>(
    k: &K,
    x: &FunctionalSample,
    y: &FunctionalSample,
) -> Result<DMatrix<f64>> {
    k.check_grid(x.grid())?;
    let mut f = features_of(k, x)?;
    f.extend(features_of(k, y)?);
    Ok(gram_from_features(k, x.grid(), &f, &f))
}

/// U-statistic on a pooled Gram matrix with the two halves given by index.
///
/// Each pair contributes `(k(Xᵢ,Xⱼ) + k(Yᵢ,Yⱼ)) − (k(Xᵢ,Yⱼ) + k(Xⱼ,Yᵢ))`, a
/// form that is bitwise symmetric under swapping the halves.
pub(crate) fn mmd2_u_indexed(g: &DMatrix<f64>, xi: &[usize], yi: &[usize]) -> f64 {
    let n = xi.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let within = g[(xi[i], xi[j])] + g[(yi[i], yi[j])];
            let across = g[(xi[i], yi[j])] + g[(xi[j], yi[i])];
            total += within - across;
        }
    }
    2.0 * total / (n as f64 * (n - 1) as f64)
}

/// Unbiased MMD² estimate
/// `2/(n(n−1)) Σ_{i<j} [k(Xᵢ,Xⱼ) + k(Yᵢ,Yⱼ) − k(Xᵢ,Yⱼ) − k(Xⱼ,Yᵢ)]`.
pub fn mmd2_u<K: Kernel + ?Sized>(k: &K, x: &FunctionalSample, y: &FunctionalSample) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.n();
    if n < 2 {
        return invalid("the U-statistic needs at least two curves per sample");
    }
    let g = pooled_gram(k, x, y)?;
    let xi: Vec<usize> = (0..n).collect();
    let yi: Vec<usize> = (n..2 * n).collect();
    Ok(mmd2_u_indexed(&g, &xi, &yi))
}

/// Biased (V-statistic) MMD², the squared RKHS distance of the two
/// empirical embeddings.
///
/// Row sums are accumulated without materializing the Gram matrix, so memory
/// stays linear in `n`.
pub fn mmd2_v<K: Kernel + ?Sized>(k: &K, x: &FunctionalSample, y: &FunctionalSample) -> Result<f64> {
    check_pair(x, y)?;
    k.check_grid(x.grid())?;
    let grid = x.grid();
    let fx = features_of(k, x)?;
    let fy = features_of(k, y)?;
    let row_sums: Vec<(f64, f64, f64)> = (0..x.n())
        .into_par_iter()
        .map(|i| {
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for j in 0..fx.len() {
                sxx += k.eval_features(grid, &fx[i], &fx[j]);
                sxy += k.eval_features(grid, &fx[i], &fy[j]);
                syy += k.eval_features(grid, &fy[i], &fy[j]);
            }
            (sxx, sxy, syy)
        })
        .collect();
    let (sxx, sxy, syy) = row_sums
        .iter()
        .fold((0.0, 0.0, 0.0), |acc, r| (acc.0 + r.0, acc.1 + r.1, acc.2 + r.2));
    let nn = (x.n() * x.n()) as f64;
    Ok(sxx / nn - 2.0 * sxy / nn + syy / nn)
}

/// Finite discrete probability measure on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Weights are normalized to sum to one.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return invalid("need one positive weight per atom");
        }
        if atoms.iter().any(|a| !a.is_finite()) || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return invalid("atoms must be finite and weights nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return invalid("weights sum to zero");
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(DiscreteMeasure { atoms, weights })
    }

    /// Equal weights on the given atoms.
    pub fn uniform(atoms: Vec<f64>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0; n])
    }

    pub fn dirac(a: f64) -> Result<Self> {
        Self::new(vec![a], vec![1.0])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Characteristic function `(Re, Im)` at frequency `v`.
    fn char_fn(&self, v: f64) -> (f64, f64) {
        self.atoms
            .iter()
            .zip(&self.weights)
            .fold((0.0, 0.0), |(re, im), (a, w)| {
                let (s, c) = (v * a).sin_cos();
                (re + w * c, im + w * s)
            })
    }
}

/// MMD² of two scalar discrete measures under the unnormalized SE kernel
/// `e^{−(s−t)²/(2h²)}`, computed as the weighted `L²` distance of their
/// characteristic functions against the kernel's spectral density
/// `N(0, h^{−2})`.
///
/// The frequency integral is truncated to `±8` spectral standard deviations
/// and evaluated with the composite trapezoid rule on `quad_points` nodes.
pub fn mmd2_spectral_1d(h: f64, p: &DiscreteMeasure, q: &DiscreteMeasure, quad_points: usize) -> Result<f64> {
    if quad_points < 16 {
        return invalid(format!("need at least 16 quadrature nodes, got {quad_points}"));
    }
    if !(h > 0.0) || !h.is_finite() {
        return invalid(format!("bandwidth must be positive, got {h}"));
    }
    const HALF_WIDTH: f64 = 8.0;
    let step = 2.0 * HALF_WIDTH / (quad_points - 1) as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut total = 0.0;
    for i in 0..quad_points {
        // u is the standardized frequency, v = u / h the actual one
        let u = -HALF_WIDTH + i as f64 * step;
        let v = u / h;
        let (pr, pi) = p.char_fn(v);
        let (qr, qi) = q.char_fn(v);
        let diff = (pr - qr).powi(2) + (pi - qi).powi(2);
        let density = norm * (-0.5 * u * u).exp();
        let w = if i == 0 || i == quad_points - 1 { 0.5 * step } else { step };
        total += w * diff * density;
    }
    Ok(total)
}

/// `max_x |Φ_A(x) − Φ_B(x)|` over the probe curves.
pub fn sup_witness_gap(ea: &EmbeddedMeasure, eb: &EmbeddedMeasure, probes: &FunctionalSample) -> Result<f64> {
    if ea.kernel() != eb.kernel() {
        return invalid("embeddings use different kernels");
    }
    if !same_grid(ea.grid(), eb.grid()) || !same_grid(ea.grid(), probes.grid()) {
        return Err(Error::IncompatibleGrids);
    }
    Ok(probes
        .rows()
        .map(|x| (ea.eval_values(x) - eb.eval_values(x)).abs())
        .fold(0.0, f64::max))
}
