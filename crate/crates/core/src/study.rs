//! Monte Carlo studies of the asymptotic behaviour of empirical embeddings
//! and depths: uniform consistency rate, h-mode rate, consistency under
//! discretized noisy observation, pointwise CLT and characteristic-kernel
//! witnesses.
//!
//! Each repetition `(i, r)` draws from its own derived seed and results are
//! aggregated in index order, so tables are bitwise reproducible under any
//! rayon thread count.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::depth::h_mode;
use crate::embedding::{sup_witness_gap, EmbeddedMeasure, GaussianEmbedding};
use crate::error::{invalid, Error, Result};
use crate::funcspace::{
    l2_norm, reconstruct, sample_gaussian, Curve, FunctionalSample, GaussianMeasureSpec, Grid,
};
use crate::kernels::{features_of, Kernel, KernelSpec, RadialFamily, RadialKappa};
use crate::rng::{derive_seed, stream};

/// Sample size of each empirical embedding in [`characteristic_witness`]
/// when no closed form is available.
pub const WITNESS_SAMPLE_SIZE: usize = 10_000;

/// Minimum number of repetitions accepted by [`clt_check`].
pub const CLT_MIN_REPS: usize = 200;

// Top-level seed paths keep the random streams of different studies apart.
const PATH_PROBES: u64 = 0;
const PATH_DRAWS: u64 = 1;
const PATH_NOISE: u64 = 2;

/// Grid size of [`reference_gaussian`].
pub const REFERENCE_GRID_SIZE: usize = 51;

/// Eigenvalues of the reference covariance on the cosine basis; trace 0.5.
pub const REFERENCE_SPECTRUM: [f64; 4] = [0.25, 0.15, 0.07, 0.03];

/// Default measure for the studies and the CLI simulator: a rank-4 Gaussian
/// process on a 51-point grid over `[0, 1]` whose covariance has the cosine
/// functions `1, √2 cos(πt), √2 cos(2πt), √2 cos(3πt)` as eigenfunctions,
/// with constant mean `mean_level`.
pub fn reference_gaussian(mean_level: f64) -> Result<GaussianMeasureSpec> {
    let grid = crate::funcspace::make_uniform_grid(REFERENCE_GRID_SIZE, 0.0, 1.0)?;
    let basis = crate::funcspace::cosine_basis(&grid, REFERENCE_SPECTRUM.len());
    let cov = crate::funcspace::CovOperator::from_spectrum(grid.clone(), &REFERENCE_SPECTRUM, &basis)?;
    GaussianMeasureSpec::new(Curve::constant(grid, mean_level)?, cov)
}

/// Mean error per sample size with standard errors and the log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub n_values: Vec<usize>,
    pub errors: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub fitted_slope: f64,
    pub seed: u64,
}

impl RateTable {
    fn from_errors(n_values: &[usize], per_n: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let (errors, stderrs): (Vec<f64>, Vec<f64>) = per_n.iter().map(|e| mean_stderr(e)).unzip();
        let fitted_slope = loglog_slope(n_values, &errors)?;
        Ok(RateTable {
            n_values: n_values.to_vec(),
            errors,
            stderrs,
            fitted_slope,
            seed,
        })
    }

    /// Number of adjacent pairs where the mean error increases.
    pub fn inversions(&self) -> usize {
        self.errors.windows(2).filter(|w| w[1] > w[0]).count()
    }

    /// `errors[i] · (n_i / log n_i)^{1/2}`.
    pub fn scaled_errors(&self) -> Vec<f64> {
        self.n_values
            .iter()
            .zip(&self.errors)
            .map(|(&n, e)| {
                let n = n as f64;
                e * (n / n.ln()).sqrt()
            })
            .collect()
    }
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// Least-squares slope of `log(error)` against `log(n)`.
pub fn loglog_slope(n_values: &[usize], errors: &[f64]) -> Result<f64> {
    if n_values.len() != errors.len() || n_values.len() < 2 {
        return invalid("need at least two (n, error) pairs");
    }
    if errors.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return invalid("errors must be positive and finite for a log-log fit");
    }
    let xs: Vec<f64> = n_values.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

fn check_schedule(n_values: &[usize], min_len: usize, what: &str) -> Result<()> {
    if n_values.len() < min_len {
        return invalid(format!("need at least {min_len} {what}, got {}", n_values.len()));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) {
        return invalid(format!("{what} must be strictly increasing"));
    }
    if n_values[0] == 0 {
        return invalid(format!("{what} must be positive"));
    }
    Ok(())
}

fn check_se(k: &KernelSpec) -> Result<()> {
    if k.family() != RadialFamily::Se {
        return Err(Error::UnsupportedClosedForm(format!(
            "this study needs a closed-form truth, which exists for SE kernels only, got {}",
            k.describe()
        )));
    }
    Ok(())
}

/// Runs `task(i, r)` for every schedule index and repetition in parallel and
/// regroups the results by schedule index.
fn run_grid<T: Send>(
    len: usize,
    reps: usize,
    task: impl Fn(usize, usize) -> Result<T> + Sync,
) -> Result<Vec<Vec<T>>> {
    let flat = (0..len * reps)
        .into_par_iter()
        .map(|t| task(t / reps, t % reps))
        .collect::<Result<Vec<T>>>()?;
    let mut out: Vec<Vec<T>> = (0..len).map(|_| Vec::with_capacity(reps)).collect();
    for (t, v) in flat.into_iter().enumerate() {
        out[t / reps].push(v);
    }
    Ok(out)
}

/// Probe set: `count` draws from `g` plus its mean.
fn probe_set(g: &GaussianMeasureSpec, count: usize, seed: u64) -> Result<FunctionalSample> {
    let mean = FunctionalSample::from_curves(std::slice::from_ref(&g.mean))?;
    if count == 0 {
        return Ok(mean);
    }
    sample_gaussian(g, count, seed)?.concat(&mean)
}

/// Empirical embedding values `n⁻¹ Σᵢ k(p, Xᵢ)` at each probe `p`.
fn empirical_kme_at<K: Kernel + ?Sized>(
    k: &K,
    probe_feats: &[Vec<f64>],
    s: &FunctionalSample,
) -> Result<Vec<f64>> {
    let feats = features_of(k, s)?;
    let grid = s.grid();
    let n = s.n() as f64;
    Ok(probe_feats
        .iter()
        .map(|p| feats.iter().map(|f| k.eval_features(grid, p, f)).sum::<f64>() / n)
        .collect())
}

/// Sup-probe error of the empirical embedding `Φ_k P_n` against the closed
/// form `Φ_k P` for Gaussian `P`, averaged over `reps` samples per `n`.
pub fn rate_sup_error(
    g: &GaussianMeasureSpec,
    k: &KernelSpec,
    n_values: &[usize],
    reps: usize,
    probes: usize,
    seed: u64,
) -> Result<RateTable> {
    check_se(k)?;
    check_schedule(n_values, 3, "sample sizes")?;
    if reps == 0 {
        return invalid("need at least one repetition");
    }
    let truth = GaussianEmbedding::new(g, k)?;
    let probe_sample = probe_set(g, probes, derive_seed(seed, &[PATH_PROBES]))?;
    let truth_vals: Vec<f64> = probe_sample.rows().map(|x| truth.eval_values(x)).collect();
    let probe_feats = features_of(k, &probe_sample)?;
    let per_n = run_grid(n_values.len(), reps, |i, r| {
        let s = sample_gaussian(g, n_values[i], derive_seed(seed, &[PATH_DRAWS, i as u64, r as u64]))?;
        let emp = empirical_kme_at(k, &probe_feats, &s)?;
        Ok(emp
            .iter()
            .zip(&truth_vals)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    })?;
    RateTable::from_errors(n_values, per_n, seed)
}

/// `L²` distance between the sample h-mode and the mean of a Gaussian `P`
/// (its population h-mode), averaged over `reps` samples per `n`.
pub fn rate_mode(
    g: &GaussianMeasureSpec,
    kappa: &RadialKappa,
    n_values: &[usize],
    reps: usize,
    seed: u64,
) -> Result<RateTable> {
    if kappa.family != RadialFamily::Se {
        return Err(Error::UnsupportedClosedForm(
            "the mode study is defined for SE kernels".into(),
        ));
    }
    check_schedule(n_values, 3, "sample sizes")?;
    if reps == 0 {
        return invalid("need at least one repetition");
    }
    let per_n = run_grid(n_values.len(), reps, |i, r| {
        let s = sample_gaussian(g, n_values[i], derive_seed(seed, &[PATH_DRAWS, i as u64, r as u64]))?;
        let (_, mode, _) = h_mode(kappa, &s);
        Ok(l2_norm(&mode.sub(&g.mean)?))
    })?;
    // A degenerate measure puts every draw on the mean: report exact zeros
    // and a zero slope instead of failing the log-log fit.
    if per_n.iter().flatten().all(|e| *e == 0.0) {
        let len = n_values.len();
        return Ok(RateTable {
            n_values: n_values.to_vec(),
            errors: vec![0.0; len],
            stderrs: vec![0.0; len],
            fitted_slope: 0.0,
            seed,
        });
    }
    RateTable::from_errors(n_values, per_n, seed)
}

/// Smoothing bandwidth used when reconstructing curves from raw observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthRule {
    /// The same bandwidth for every raw grid size.
    Fixed(f64),
    /// A multiple of the raw sampling interval `(b − a)/(m_raw − 1)`.
    SpacingMultiple(f64),
}

impl BandwidthRule {
    pub fn bandwidth(&self, grid: &Grid, m_raw: usize) -> f64 {
        match *self {
            BandwidthRule::Fixed(h) => h,
            BandwidthRule::SpacingMultiple(c) => c * (grid.end() - grid.start()) / (m_raw - 1) as f64,
        }
    }
}

/// Equispaced raw observation times on the grid's interval.
pub fn raw_times(grid: &Grid, m_raw: usize) -> Vec<f64> {
    let (a, b) = (grid.start(), grid.end());
    let step = (b - a) / (m_raw - 1) as f64;
    let mut t: Vec<f64> = (0..m_raw).map(|i| a + i as f64 * step).collect();
    t[m_raw - 1] = b;
    t
}

/// Piecewise-linear interpolation of grid values at `t` (inside the grid).
fn interpolate(grid: &Grid, values: &[f64], t: f64) -> f64 {
    let pts = grid.points();
    let j = pts.partition_point(|p| *p <= t);
    if j == 0 {
        return values[0];
    }
    if j >= pts.len() {
        return values[pts.len() - 1];
    }
    let (p0, p1) = (pts[j - 1], pts[j]);
    if t == p0 {
        return values[j - 1];
    }
    let u = (t - p0) / (p1 - p0);
    values[j - 1] + u * (values[j] - values[j - 1])
}

/// Observes every curve at `m_raw` equispaced times with additive
/// `N(0, noise_sd²)` noise and smooths back onto the sample's grid.
pub fn observe_and_reconstruct(
    s: &FunctionalSample,
    m_raw: usize,
    noise_sd: f64,
    rule: BandwidthRule,
    seed: u64,
) -> Result<FunctionalSample> {
    if m_raw < 2 {
        return invalid(format!("need at least two raw observations, got {m_raw}"));
    }
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return invalid(format!("noise sd must be non-negative, got {noise_sd}"));
    }
    let grid = s.grid();
    let times = raw_times(grid, m_raw);
    let h = rule.bandwidth(grid, m_raw);
    let curves = (0..s.n())
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let row = s.row(i);
            let raw: Vec<f64> = times
                .iter()
                .map(|&t| {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    interpolate(grid, row, t) + noise_sd * eps
                })
                .collect();
            reconstruct(&times, &raw, grid, h)
        })
        .collect::<Result<Vec<Curve>>>()?;
    FunctionalSample::from_curves(&curves)
}

/// Sup-probe gap between the embedding of reconstructed curves and the
/// embedding of the perfectly observed ones, per raw grid size.
///
/// Each repetition keeps one clean sample across all raw grid sizes; probes
/// are the clean curves plus the mean.
#[allow(clippy::too_many_arguments)]
pub fn discretized_consistency(
    g: &GaussianMeasureSpec,
    k: &KernelSpec,
    n: usize,
    raw_counts: &[usize],
    noise_sd: f64,
    rule: BandwidthRule,
    reps: usize,
    seed: u64,
) -> Result<RateTable> {
    check_se(k)?;
    check_schedule(raw_counts, 2, "raw grid sizes")?;
    if raw_counts[0] < 2 {
        return invalid("raw grid sizes must be at least 2");
    }
    if n == 0 || reps == 0 {
        return invalid("need positive sample size and repetitions");
    }
    let clean: Vec<FunctionalSample> = (0..reps)
        .into_par_iter()
        .map(|r| sample_gaussian(g, n, derive_seed(seed, &[PATH_DRAWS, r as u64])))
        .collect::<Result<_>>()?;
    let mean = FunctionalSample::from_curves(std::slice::from_ref(&g.mean))?;
    let per_m = run_grid(raw_counts.len(), reps, |i, r| {
        let s = &clean[r];
        let noisy_seed = derive_seed(seed, &[PATH_NOISE, i as u64, r as u64]);
        let tilde = observe_and_reconstruct(s, raw_counts[i], noise_sd, rule, noisy_seed)?;
        let probes = s.concat(&mean)?;
        let ea = EmbeddedMeasure::empirical(tilde, k.clone())?;
        let eb = EmbeddedMeasure::empirical(s.clone(), k.clone())?;
        sup_witness_gap(&ea, &eb, &probes)
    })?;
    let (errors, stderrs): (Vec<f64>, Vec<f64>) = per_m.iter().map(|e| mean_stderr(e)).unzip();
    let fitted_slope = if errors.iter().all(|e| *e > 0.0) {
        loglog_slope(raw_counts, &errors)?
    } else {
        0.0
    };
    Ok(RateTable {
        n_values: raw_counts.to_vec(),
        errors,
        stderrs,
        fitted_slope,
        seed,
    })
}

/// Moments of `Z_r = √n (Φ_k P_n(x) − Φ_k P(x))` over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltDiagnostic {
    pub standardized_skewness: f64,
    pub excess_kurtosis: f64,
    /// Correlation of the sorted studentized `Z` with standard normal
    /// quantiles at `(i − ½)/R`.
    pub qq_correlation: f64,
    pub z_mean: f64,
    pub z_variance: f64,
    /// Sample variance of `k(x, X)` pooled over every draw.
    pub plugin_variance: f64,
    pub seed: u64,
}

/// Pointwise CLT check of the empirical embedding at the probe `x`.
pub fn clt_check(
    g: &GaussianMeasureSpec,
    k: &KernelSpec,
    x: &Curve,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<CltDiagnostic> {
    check_se(k)?;
    if reps < CLT_MIN_REPS {
        return Err(Error::InsufficientReplicates {
            min: CLT_MIN_REPS,
            got: reps,
        });
    }
    if n < 2 {
        return invalid("need at least two curves per repetition");
    }
    let truth = GaussianEmbedding::new(g, k)?.eval(x)?;
    let probe = FunctionalSample::from_curves(std::slice::from_ref(x))?;
    let probe_feat = features_of(k, &probe)?.remove(0);
    let per_rep: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let s = sample_gaussian(g, n, derive_seed(seed, &[PATH_DRAWS, r as u64]))?;
            let grid = s.grid();
            let feats = features_of(k, &s)?;
            let vals: Vec<f64> = feats.iter().map(|f| k.eval_features(grid, &probe_feat, f)).collect();
            let sum: f64 = vals.iter().sum();
            let sum_sq: f64 = vals.iter().map(|v| v * v).sum();
            Ok((sum, sum_sq))
        })
        .collect::<Result<_>>()?;
    let nf = n as f64;
    let z: Vec<f64> = per_rep.iter().map(|(s, _)| nf.sqrt() * (s / nf - truth)).collect();
    let total: f64 = per_rep.iter().map(|p| p.0).sum();
    let total_sq: f64 = per_rep.iter().map(|p| p.1).sum();
    let count = nf * reps as f64;
    let plugin_variance = (total_sq - total * total / count) / (count - 1.0);

    let r = reps as f64;
    let z_mean = z.iter().sum::<f64>() / r;
    let central = |p: i32| z.iter().map(|v| (v - z_mean).powi(p)).sum::<f64>() / r;
    let m2 = central(2);
    let standardized_skewness = central(3) / m2.powf(1.5);
    let excess_kurtosis = central(4) / (m2 * m2) - 3.0;
    let z_variance = m2 * r / (r - 1.0);

    let sd = z_variance.sqrt();
    let mut studentized: Vec<f64> = z.iter().map(|v| (v - z_mean) / sd).collect();
    studentized.sort_by(f64::total_cmp);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let quantiles: Vec<f64> = (0..reps)
        .map(|i| normal.inverse_cdf((i as f64 + 0.5) / r))
        .collect();
    let qq_correlation = correlation(&studentized, &quantiles);

    Ok(CltDiagnostic {
        standardized_skewness,
        excess_kurtosis,
        qq_correlation,
        z_mean,
        z_variance,
        plugin_variance,
        seed,
    })
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let k = a.len() as f64;
    let ma = a.iter().sum::<f64>() / k;
    let mb = b.iter().sum::<f64>() / k;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Largest gap `|Φ_k A(x) − Φ_k B(x)|` over probes drawn from both measures
/// plus both means.
///
/// SE kernels use the closed-form embeddings; other families use empirical
/// embeddings of [`WITNESS_SAMPLE_SIZE`] draws from each measure.
pub fn characteristic_witness(
    ga: &GaussianMeasureSpec,
    gb: &GaussianMeasureSpec,
    k: &KernelSpec,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    let pa = probe_set(ga, probes, derive_seed(seed, &[PATH_PROBES, 0]))?;
    let pb = probe_set(gb, probes, derive_seed(seed, &[PATH_PROBES, 1]))?;
    let probe_sample = pa.concat(&pb)?;
    let (ea, eb) = if k.family() == RadialFamily::Se {
        (
            EmbeddedMeasure::gaussian(ga.clone(), k.clone())?,
            EmbeddedMeasure::gaussian(gb.clone(), k.clone())?,
        )
    } else {
        let sa = sample_gaussian(ga, WITNESS_SAMPLE_SIZE, derive_seed(seed, &[PATH_DRAWS, 0]))?;
        let sb = sample_gaussian(gb, WITNESS_SAMPLE_SIZE, derive_seed(seed, &[PATH_DRAWS, 1]))?;
        (
            EmbeddedMeasure::empirical(sa, k.clone())?,
            EmbeddedMeasure::empirical(sb, k.clone())?,
        )
    };
    sup_witness_gap(&ea, &eb, &probe_sample)
}

/// Draws `n` curves `t ↦ exp(Z(t))` with `Z ~ g`: a non-Gaussian process
/// with Gaussian log-marginals.
pub fn sample_exp_gaussian(g: &GaussianMeasureSpec, n: usize, seed: u64) -> Result<FunctionalSample> {
    let s = sample_gaussian(g, n, seed)?;
    let data = s.as_flat().iter().map(|v| v.exp()).collect();
    FunctionalSample::from_flat(s.grid().clone(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::mmd2_v;
    use crate::funcspace::{make_uniform_grid, CovOperator};

    fn small() -> GaussianMeasureSpec {
        reference_gaussian(0.0).unwrap()
    }

    #[test]
    fn test_loglog_slope_exact() {
        let ns = [10, 100, 1000];
        let errs: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-0.5)).collect();
        assert!((loglog_slope(&ns, &errs).unwrap() + 0.5).abs() < 1e-12);
        assert!(loglog_slope(&ns, &[1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn test_reference_measure_trace() {
        let g = small();
        assert_eq!(g.grid().len(), REFERENCE_GRID_SIZE);
        assert!((g.cov.trace() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn test_rate_sup_error_decreases() {
        let t = rate_sup_error(&small(), &KernelSpec::se_unit(), &[20, 80, 320], 20, 5, 3).unwrap();
        assert!(t.inversions() <= 1);
        assert!(t.errors[2] < t.errors[0]);
        assert!(t.fitted_slope.is_finite());
    }

    #[test]
    fn test_rate_sup_error_rejects_imq() {
        let imq = KernelSpec::identity(RadialKappa::unnormalized(RadialFamily::Imq, 1.0).unwrap());
        assert!(matches!(
            rate_sup_error(&small(), &imq, &[10, 20, 40], 2, 2, 0),
            Err(Error::UnsupportedClosedForm(_))
        ));
        assert!(rate_sup_error(&small(), &KernelSpec::se_unit(), &[10, 20], 2, 2, 0).is_err());
    }

    #[test]
    fn test_rate_mode_degenerate_measure() {
        let g = make_uniform_grid(11, 0.0, 1.0).unwrap();
        let spec = GaussianMeasureSpec::new(Curve::constant(g.clone(), 0.7).unwrap(), CovOperator::zero(g)).unwrap();
        let kappa = RadialKappa::unnormalized(RadialFamily::Se, 1.0).unwrap();
        let t = rate_mode(&spec, &kappa, &[5, 10, 20], 3, 1).unwrap();
        assert_eq!(t.errors, vec![0.0; 3]);
    }

    #[test]
    fn test_rate_mode_decreases() {
        let kappa = RadialKappa::unnormalized(RadialFamily::Se, 1.0).unwrap();
        let t = rate_mode(&small(), &kappa, &[25, 100, 400], 20, 2).unwrap();
        assert!(t.errors[2] < t.errors[0], "{t:?}");
    }

    #[test]
    fn test_discretized_exact_observation() {
        let g = small();
        let m = g.grid().len();
        let t = discretized_consistency(
            &g,
            &KernelSpec::se_unit(),
            10,
            &[m, 2 * m],
            0.0,
            BandwidthRule::Fixed(1e-4),
            2,
            5,
        )
        .unwrap();
        assert!(t.errors[0] < 1e-6, "{t:?}");
    }

    #[test]
    fn test_discretized_errors_decrease() {
        let t = discretized_consistency(
            &small(),
            &KernelSpec::se_unit(),
            20,
            &[10, 40, 160],
            0.2,
            BandwidthRule::SpacingMultiple(1.0),
            10,
            6,
        )
        .unwrap();
        assert!(t.inversions() <= 1);
        assert!(t.errors[2] < t.errors[0], "{t:?}");
    }

    #[test]
    fn test_discretized_gap_bounded_by_mmd() {
        let g = small();
        let k = KernelSpec::se_unit();
        let s = sample_gaussian(&g, 15, 1).unwrap();
        let tilde = observe_and_reconstruct(&s, 12, 0.3, BandwidthRule::SpacingMultiple(1.0), 2).unwrap();
        let mean = FunctionalSample::from_curves(std::slice::from_ref(&g.mean)).unwrap();
        let probes = s.concat(&mean).unwrap();
        let ea = EmbeddedMeasure::empirical(tilde.clone(), k.clone()).unwrap();
        let eb = EmbeddedMeasure::empirical(s.clone(), k.clone()).unwrap();
        let gap = sup_witness_gap(&ea, &eb, &probes).unwrap();
        let mmd = mmd2_v(&k, &tilde, &s).unwrap().max(0.0).sqrt();
        assert!(gap <= k.at_zero().sqrt() * mmd + 1e-10);
    }

    #[test]
    fn test_clt_requires_reps() {
        let g = small();
        assert_eq!(
            clt_check(&g, &KernelSpec::se_unit(), &g.mean, 10, 199, 0),
            Err(Error::InsufficientReplicates { min: 200, got: 199 })
        );
    }

    #[test]
    fn test_clt_variance_matches_plugin() {
        let g = small();
        let d = clt_check(&g, &KernelSpec::se_unit(), &g.mean, 200, 400, 4).unwrap();
        assert!((d.z_variance / d.plugin_variance - 1.0).abs() < 0.15, "{d:?}");
        assert!(d.qq_correlation > 0.98);
    }

    #[test]
    fn test_witness_examples() {
        let k = KernelSpec::se_unit();
        let a = small();
        assert!(characteristic_witness(&a, &a, &k, 10, 0).unwrap() < 1e-12);
        let b = reference_gaussian(1.0).unwrap();
        assert!(characteristic_witness(&a, &b, &k, 10, 0).unwrap() > 0.05);
        let c2 = GaussianMeasureSpec::new(a.mean.clone(), a.cov.scaled(2.0).unwrap()).unwrap();
        assert!(characteristic_witness(&a, &c2, &k, 10, 0).unwrap() > 0.0);
    }

    #[test]
    fn test_studies_reproducible() {
        let k = KernelSpec::se_unit();
        let a = rate_sup_error(&small(), &k, &[10, 20, 40], 4, 3, 11).unwrap();
        let b = rate_sup_error(&small(), &k, &[10, 20, 40], 4, 3, 11).unwrap();
        assert_eq!(a, b);
    }
}
