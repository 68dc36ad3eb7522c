//! Discretized function-space numerics.
//!
//! Curves are stored as values on a shared [`Grid`] carrying trapezoid
//! quadrature weights, so the `L²([a,b])` inner product becomes the weighted
//! sum `Σ wᵢ xᵢ yᵢ`. Covariance operators are integral operators with a kernel
//! matrix `k_C(sᵢ, sⱼ)`; they act on a curve as `(C f)(sᵢ) = Σⱼ k_C(sᵢ,sⱼ) wⱼ f(sⱼ)`.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const CLAMP_REL_TOL: f64 = 1e-12;
/// Relative weighted time spread below which the local-linear fit reduces to
/// a local average.
const SPREAD_REL_TOL: f64 = 1e-8;

/// Sampling grid on `[a, b]` with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Builds a grid from strictly increasing abscissae, using composite
    /// trapezoid weights (spacing may be non-uniform).
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return invalid("a grid needs at least two points");
        }
        if points.iter().any(|p| !p.is_finite()) {
            return invalid("grid points must be finite");
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("grid points must be strictly increasing");
        }
        let m = points.len();
        let mut weights = vec![0.0; m];
        for i in 0..m - 1 {
            let half = 0.5 * (points[i + 1] - points[i]);
            weights[i] += half;
            weights[i + 1] += half;
        }
        Ok(Grid { points, weights })
    }

    /// Builds a grid with caller-supplied positive quadrature weights, e.g.
    /// unit weights so that the quadrature norm is the Euclidean norm of the
    /// value vector.
    pub fn with_weights(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let base = Grid::from_points(points)?;
        if weights.len() != base.points.len() {
            return invalid(format!(
                "expected {} weights, got {}",
                base.points.len(),
                weights.len()
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return invalid("quadrature weights must be positive and finite");
        }
        Ok(Grid {
            points: base.points,
            weights,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; grids hold at least two points.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Quadrature inner product of two value vectors on this grid.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .zip(y)
            .map(|((w, a), b)| w * a * b)
            .sum()
    }

    /// Squared quadrature distance `Σ wᵢ (xᵢ − yᵢ)²`.
    pub fn sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .zip(y)
            .map(|((w, a), b)| {
                let d = a - b;
                w * d * d
            })
            .sum()
    }
}

/// `m` equispaced points on `[a, b]` with trapezoid weights.
pub fn make_uniform_grid(m: usize, a: f64, b: f64) -> Result<Arc<Grid>> {
    if m < 2 {
        return invalid(format!("grid size must be at least 2, got {m}"));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return invalid(format!("grid interval [{a}, {b}] is empty or not finite"));
    }
    let step = (b - a) / (m - 1) as f64;
    let mut points: Vec<f64> = (0..m).map(|i| a + i as f64 * step).collect();
    points[m - 1] = b;
    let mut weights = vec![step; m];
    weights[0] = 0.5 * step;
    weights[m - 1] = 0.5 * step;
    Ok(Arc::new(Grid { points, weights }))
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn check_grids(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if same_grid(a, b) {
        Ok(())
    } else {
        Err(Error::IncompatibleGrids)
    }
}

/// A function represented by its values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "curve has {} values but the grid has {} points",
                values.len(),
                grid.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("curve values must be finite");
        }
        Ok(Curve { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Curve::new(grid, values)
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Result<Self> {
        let m = grid.len();
        Curve::new(grid, vec![c; m])
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let m = grid.len();
        Curve {
            grid,
            values: vec![0.0; m],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise `self − other`.
    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        check_grids(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Curve {
            grid: self.grid.clone(),
            values,
        })
    }

    /// Pointwise `self + c·other`.
    pub fn axpy(&self, c: f64, other: &Curve) -> Result<Curve> {
        check_grids(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Ok(Curve {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn scale(&self, c: f64) -> Curve {
        Curve {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn shift(&self, c: f64) -> Curve {
        Curve {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }
}

/// Quadrature inner product `Σ wᵢ xᵢ yᵢ`.
pub fn l2_inner(x: &Curve, y: &Curve) -> Result<f64> {
    check_grids(&x.grid, &y.grid)?;
    Ok(x.grid.inner(&x.values, &y.values))
}

pub fn l2_norm(x: &Curve) -> f64 {
    x.grid.inner(&x.values, &x.values).max(0.0).sqrt()
}

/// `n` curves sharing one grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    grid: Arc<Grid>,
    data: Vec<f64>,
    n: usize,
}

impl FunctionalSample {
    pub fn new(grid: Arc<Grid>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return invalid("a sample needs at least one curve");
        }
        let m = grid.len();
        let n = rows.len();
        let mut data = Vec::with_capacity(n * m);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return invalid(format!(
                    "row {i} has {} values but the grid has {m} points",
                    row.len()
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return invalid(format!("row {i} has non-finite values"));
            }
            data.extend(row);
        }
        Ok(FunctionalSample { grid, data, n })
    }

    /// Builds a sample from a flat row-major buffer of `n × grid.len()` values.
    pub fn from_flat(grid: Arc<Grid>, data: Vec<f64>) -> Result<Self> {
        let m = grid.len();
        if data.is_empty() || !data.len().is_multiple_of(m) {
            return invalid("flat buffer length is not a positive multiple of the grid size");
        }
        if data.iter().any(|v| !v.is_finite()) {
            return invalid("sample values must be finite");
        }
        let n = data.len() / m;
        Ok(FunctionalSample { grid, data, n })
    }

    pub fn from_curves(curves: &[Curve]) -> Result<Self> {
        let first = curves
            .first()
            .ok_or_else(|| Error::InvalidArgument("a sample needs at least one curve".into()))?;
        let grid = first.grid.clone();
        let mut data = Vec::with_capacity(curves.len() * grid.len());
        for c in curves {
            check_grids(&grid, &c.grid)?;
            data.extend_from_slice(&c.values);
        }
        Ok(FunctionalSample {
            grid,
            data,
            n: curves.len(),
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Number of curves.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points.
    pub fn m(&self) -> usize {
        self.grid.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.m();
        &self.data[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.m())
    }

    pub fn curve(&self, i: usize) -> Curve {
        Curve {
            grid: self.grid.clone(),
            values: self.row(i).to_vec(),
        }
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Subsample by row index (indices may repeat).
    pub fn select(&self, idx: &[usize]) -> Result<FunctionalSample> {
        if idx.is_empty() {
            return invalid("selection is empty");
        }
        let mut data = Vec::with_capacity(idx.len() * self.m());
        for &i in idx {
            if i >= self.n {
                return invalid(format!("row index {i} out of range"));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(FunctionalSample {
            grid: self.grid.clone(),
            data,
            n: idx.len(),
        })
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &FunctionalSample) -> Result<FunctionalSample> {
        check_grids(&self.grid, &other.grid)?;
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(FunctionalSample {
            grid: self.grid.clone(),
            data,
            n: self.n + other.n,
        })
    }

    /// Every row shifted pointwise by the curve `c`.
    pub fn translate(&self, c: &Curve) -> Result<FunctionalSample> {
        check_grids(&self.grid, &c.grid)?;
        let m = self.m();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, v)| v + c.values[k % m])
            .collect();
        Ok(FunctionalSample {
            grid: self.grid.clone(),
            data,
            n: self.n,
        })
    }
}

/// Eigenpairs of a covariance operator in the quadrature inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpairs {
    /// Descending, clamped to zero below `1e−12·λ_max`.
    pub values: Vec<f64>,
    /// Column `j` holds the values of eigenfunction `e_j` on the grid.
    pub functions: DMatrix<f64>,
    /// Smallest eigenvalue before clamping.
    pub raw_min: f64,
}

impl Eigenpairs {
    /// Eigenvalues strictly above zero after clamping.
    pub fn rank(&self) -> usize {
        self.values.iter().take_while(|&&l| l > 0.0).count()
    }

    pub fn function(&self, j: usize) -> &[f64] {
        let m = self.functions.nrows();
        &self.functions.as_slice()[j * m..(j + 1) * m]
    }
}

/// Symmetric positive semi-definite integral operator on a grid.
#[derive(Debug, Clone)]
pub struct CovOperator {
    grid: Arc<Grid>,
    kernel: DMatrix<f64>,
    eigen: OnceLock<Eigenpairs>,
}

impl PartialEq for CovOperator {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.kernel == other.kernel
    }
}

impl CovOperator {
    pub fn new(grid: Arc<Grid>, kernel: DMatrix<f64>) -> Result<Self> {
        let m = grid.len();
        if kernel.nrows() != m || kernel.ncols() != m {
            return Err(Error::InvalidOperator(format!(
                "kernel matrix is {}x{}, grid has {m} points",
                kernel.nrows(),
                kernel.ncols()
            )));
        }
        if kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidOperator("kernel matrix has non-finite entries".into()));
        }
        Ok(CovOperator {
            grid,
            kernel,
            eigen: OnceLock::new(),
        })
    }

    pub fn zero(grid: Arc<Grid>) -> Self {
        let m = grid.len();
        CovOperator {
            grid,
            kernel: DMatrix::zeros(m, m),
            eigen: OnceLock::new(),
        }
    }

    /// Operator with covariance function `k(s, t)` evaluated on the grid.
    pub fn from_kernel_fn(grid: Arc<Grid>, k: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let p = grid.points();
        let m = p.len();
        let kernel = DMatrix::from_fn(m, m, |i, j| k(p[i], p[j]));
        CovOperator::new(grid, kernel)
    }

    /// `Σ λⱼ φⱼ ⊗ φⱼ` after Gram–Schmidt orthonormalization of `basis` in
    /// the quadrature inner product, so the `λⱼ` are exact eigenvalues.
    pub fn from_spectrum(grid: Arc<Grid>, eigenvalues: &[f64], basis: &[Vec<f64>]) -> Result<Self> {
        if eigenvalues.len() != basis.len() {
            return invalid("need one basis function per eigenvalue");
        }
        if eigenvalues.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return invalid("eigenvalues must be finite and nonnegative");
        }
        let m = grid.len();
        let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
        for (j, b) in basis.iter().enumerate() {
            if b.len() != m {
                return invalid(format!("basis function {j} has the wrong length"));
            }
            let mut v = b.clone();
            // two passes of modified Gram–Schmidt
            for _ in 0..2 {
                for q in &ortho {
                    let c = grid.inner(&v, q);
                    v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
                }
            }
            let norm = grid.inner(&v, &v).sqrt();
            if !(norm > 1e-12) {
                return invalid(format!("basis function {j} is linearly dependent"));
            }
            v.iter_mut().for_each(|a| *a /= norm);
            ortho.push(v);
        }
        let mut kernel = DMatrix::zeros(m, m);
        for (lambda, phi) in eigenvalues.iter().zip(&ortho) {
            let phi = DVector::from_column_slice(phi);
            kernel += *lambda * &phi * phi.transpose();
        }
        CovOperator::new(grid, kernel)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn kernel_matrix(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// `Σ wᵢ k_C(sᵢ, sᵢ)`, the trace on the grid.
    pub fn trace(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.kernel[(i, i)])
            .sum()
    }

    pub fn scaled(&self, c: f64) -> Result<CovOperator> {
        if !(c >= 0.0) || !c.is_finite() {
            return invalid("operator scale must be finite and nonnegative");
        }
        CovOperator::new(self.grid.clone(), &self.kernel * c)
    }

    /// Cached eigendecomposition; see [`eigendecompose`].
    pub fn eigenpairs(&self) -> Result<&Eigenpairs> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let e = eigendecompose_matrix(&self.grid, &self.kernel)?;
        // a concurrent caller may have won; both computed the same thing
        let _ = self.eigen.set(e);
        Ok(self.eigen.get().expect("eigenpairs were just set"))
    }

    /// `C f` evaluated on the grid.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let u: DVector<f64> = DVector::from_iterator(
            f.len(),
            self.grid.weights().iter().zip(f).map(|(w, v)| w * v),
        );
        (&self.kernel * u).as_slice().to_vec()
    }
}

/// Solves the quadrature-weighted eigenproblem `∫ k_C(s,t) e(t) dt = λ e(s)`.
///
/// The problem is symmetrized as `W^{1/2} K W^{1/2}`; eigenvectors are mapped
/// back by `W^{−1/2}`, which makes the eigenfunctions orthonormal in the
/// quadrature inner product.
pub fn eigendecompose(c: &CovOperator) -> Result<Eigenpairs> {
    c.eigenpairs().cloned()
}

fn eigendecompose_matrix(grid: &Grid, k: &DMatrix<f64>) -> Result<Eigenpairs> {
    let m = grid.len();
    let scale = k.amax().max(1.0);
    for i in 0..m {
        for j in 0..i {
            if (k[(i, j)] - k[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidOperator(format!(
                    "kernel matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let sqrt_w: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let sym = DMatrix::from_fn(m, m, |i, j| {
        let kij = 0.5 * (k[(i, j)] + k[(j, i)]);
        sqrt_w[i] * kij * sqrt_w[j]
    });
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let raw_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_max = eig.eigenvalues[order[0]].max(0.0);
    let cutoff = CLAMP_REL_TOL * lambda_max;
    let mut values = Vec::with_capacity(m);
    let mut functions = DMatrix::zeros(m, m);
    for (col, &j) in order.iter().enumerate() {
        let l = eig.eigenvalues[j];
        values.push(if l > cutoff && l > 0.0 { l } else { 0.0 });
        let v = eig.eigenvectors.column(j);
        // fix the sign so the largest-magnitude entry is positive
        let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m {
            functions[(i, col)] = sign * v[i] / sqrt_w[i];
        }
    }
    Ok(Eigenpairs {
        values,
        functions,
        raw_min,
    })
}

/// `⟨C d, d⟩ = Σᵢ Σⱼ wᵢ wⱼ dᵢ k_C(sᵢ,sⱼ) dⱼ`, i.e. `‖C^{1/2} d‖²`.
pub fn quad_form(c: &CovOperator, d: &Curve) -> Result<f64> {
    check_grids(&c.grid, &d.grid)?;
    Ok(quad_form_values(c, &d.values))
}

pub(crate) fn quad_form_values(c: &CovOperator, d: &[f64]) -> f64 {
    let w = c.grid.weights();
    let m = d.len();
    let u: Vec<f64> = w.iter().zip(d).map(|(w, v)| w * v).collect();
    let mut total = 0.0;
    for j in 0..m {
        let col = c.kernel.column(j);
        let s: f64 = col.iter().zip(&u).map(|(k, ui)| k * ui).sum();
        total += s * u[j];
    }
    total
}

/// Pointwise average of the rows.
pub fn empirical_mean(s: &FunctionalSample) -> Curve {
    let m = s.m();
    let mut mean = vec![0.0; m];
    for row in s.rows() {
        mean.iter_mut().zip(row).for_each(|(a, v)| *a += v);
    }
    let inv = 1.0 / s.n() as f64;
    mean.iter_mut().for_each(|a| *a *= inv);
    Curve {
        grid: s.grid.clone(),
        values: mean,
    }
}

/// Plug-in covariance with divisor `n`.
pub fn empirical_cov(s: &FunctionalSample) -> CovOperator {
    let mean = empirical_mean(s);
    let m = s.m();
    let n = s.n();
    let centered = DMatrix::from_fn(m, n, |i, l| s.row(l)[i] - mean.values[i]);
    let mut kernel = &centered * centered.transpose();
    kernel /= n as f64;
    // the product is symmetric up to rounding; make it exact
    for i in 0..m {
        for j in 0..i {
            let v = 0.5 * (kernel[(i, j)] + kernel[(j, i)]);
            kernel[(i, j)] = v;
            kernel[(j, i)] = v;
        }
    }
    CovOperator {
        grid: s.grid.clone(),
        kernel,
        eigen: OnceLock::new(),
    }
}

/// Gaussian measure `N(m, C)` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasureSpec {
    pub mean: Curve,
    pub cov: CovOperator,
}

impl GaussianMeasureSpec {
    pub fn new(mean: Curve, cov: CovOperator) -> Result<Self> {
        check_grids(&mean.grid, &cov.grid)?;
        Ok(GaussianMeasureSpec { mean, cov })
    }

    /// Centered measure `N(0, C)`.
    pub fn centered(cov: CovOperator) -> Self {
        GaussianMeasureSpec {
            mean: Curve::zeros(cov.grid.clone()),
            cov,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.mean.grid
    }

    /// Moment fit `N(m_n, Σ_n)` to a sample.
    pub fn fit(s: &FunctionalSample) -> Self {
        GaussianMeasureSpec {
            mean: empirical_mean(s),
            cov: empirical_cov(s),
        }
    }
}

/// Karhunen–Loève draw of `n` curves `m + Σⱼ √λⱼ ξⱼ eⱼ`.
///
/// Deterministic given `(g, n, seed)`: the normals are consumed row by row
/// from one ChaCha8 stream, one per retained eigenpair.
pub fn sample_gaussian(g: &GaussianMeasureSpec, n: usize, seed: u64) -> Result<FunctionalSample> {
    if n == 0 {
        return invalid("sample size must be at least 1");
    }
    let eig = g.cov.eigenpairs()?;
    let rank = eig.rank();
    let m = g.grid().len();
    let scaled: Vec<(f64, &[f64])> = (0..rank)
        .map(|j| (eig.values[j].sqrt(), eig.function(j)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * m);
    let mut row = vec![0.0; m];
    for _ in 0..n {
        row.copy_from_slice(&g.mean.values);
        for (sd, e) in &scaled {
            let xi: f64 = StandardNormal.sample(&mut rng);
            let c = sd * xi;
            row.iter_mut().zip(e.iter()).for_each(|(r, ev)| *r += c * ev);
        }
        data.extend_from_slice(&row);
    }
    Ok(FunctionalSample {
        grid: g.grid().clone(),
        data,
        n,
    })
}

/// Local-linear smoother with Gaussian weights, evaluated on `target`.
///
/// At each target point `t` the weighted least-squares line through the raw
/// observations (weights `exp(−(t − sᵢ)²/(2 bandwidth²))`) is evaluated at
/// `t`. Compared with the plain Nadaraya–Watson average this removes the
/// first-order bias at the ends of the interval. When the weighted spread of
/// the raw times is negligible the slope is dropped, which leaves the
/// Nadaraya–Watson average; target points whose total weight underflows
/// (below `1e−300`) take the value of the nearest raw observation.
pub fn reconstruct(
    raw_times: &[f64],
    raw_values: &[f64],
    target: &Arc<Grid>,
    bandwidth: f64,
) -> Result<Curve> {
    if raw_times.is_empty() {
        return invalid("no raw observations");
    }
    if raw_times.len() != raw_values.len() {
        return invalid("raw times and values differ in length");
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return invalid(format!("bandwidth must be positive, got {bandwidth}"));
    }
    if raw_times.iter().chain(raw_values).any(|v| !v.is_finite()) {
        return invalid("raw observations must be finite");
    }
    let values = target
        .points()
        .iter()
        .map(|&t| {
            let weights: Vec<f64> = raw_times
                .iter()
                .map(|&s| {
                    let z = (t - s) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .collect();
            let total: f64 = weights.iter().sum();
            if total < 1e-300 {
                let nearest = raw_times
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                return raw_values[nearest];
            }
            let mean_t: f64 = weights.iter().zip(raw_times).map(|(w, s)| w * s).sum::<f64>() / total;
            let mean_y: f64 = weights.iter().zip(raw_values).map(|(w, y)| w * y).sum::<f64>() / total;
            let mut sxx = 0.0;
            let mut sxy = 0.0;
            for ((w, s), y) in weights.iter().zip(raw_times).zip(raw_values) {
                let ds = s - mean_t;
                sxx += w * ds * ds;
                sxy += w * ds * (y - mean_y);
            }
            if sxx <= SPREAD_REL_TOL * total * bandwidth * bandwidth {
                mean_y
            } else {
                mean_y + sxy / sxx * (t - mean_t)
            }
        })
        .collect();
    Curve::new(target.clone(), values)
}

/// Cosine basis `1, √2 cos(πt'), √2 cos(2πt'), …` with `t'` rescaled to
/// `[0, 1]`. On uniform grids these are exactly orthonormal under the
/// trapezoid rule.
pub fn cosine_basis(grid: &Grid, count: usize) -> Vec<Vec<f64>> {
    let (a, b) = (grid.start(), grid.end());
    (0..count)
        .map(|j| {
            grid.points()
                .iter()
                .map(|&t| {
                    let u = (t - a) / (b - a);
                    if j == 0 {
                        1.0
                    } else {
                        std::f64::consts::SQRT_2 * (j as f64 * std::f64::consts::PI * u).cos()
                    }
                })
                .collect()
        })
        .collect()
}
