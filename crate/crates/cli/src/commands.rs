//! Command dispatch: loads inputs, calls the library and writes report files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use kdepth::study::{
    clt_check, discretized_consistency, rate_mode, rate_sup_error, reference_gaussian, BandwidthRule, RateTable,
};
use kdepth::testing::{ecf_two_sample_test, gaussianity_test, two_sample_test, unit_trace_cov, TestMethod, TestReport};
use kdepth::{
    depth_rank, depth_rank_loo, empirical_cov, gram, h_mode, integrated_depth_closed, integrated_depth_mc, outliers,
    sample_gaussian, CovOperator, Curve, DepthMethod, DepthReport, FunctionalSample, GaussianMeasureSpec,
    KernelSpec, RadialFamily, RadialKappa, Transform,
};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{CommandKind, KernelConfig, MeasureConfig, RunConfig, StudyConfig, TransformSpec};
use crate::csvio::{fmt_f64, load_cov, load_curves, render_curves, render_table, write_atomic};
use crate::error::{usage, CliError};
use crate::report::{digest_file, render, InputDigest};

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Test decision, for the commands that run a test.
    pub reject: Option<bool>,
    pub files: Vec<PathBuf>,
}

/// Test result in the report schema.
#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct TestResult {
    statistic: f64,
    p_value: f64,
    reject: bool,
    alpha: f64,
    #[serde(rename = "B")]
    b: usize,
    seed: u64,
    method: TestMethod,
}

impl From<&TestReport> for TestResult {
    fn from(r: &TestReport) -> Self {
        TestResult {
            statistic: r.statistic,
            p_value: r.p_value,
            reject: r.reject,
            alpha: r.alpha,
            b: r.replicates,
            seed: r.seed,
            method: r.method,
        }
    }
}

struct Writer<'a> {
    config: &'a RunConfig,
    inputs: Vec<InputDigest>,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(config: &'a RunConfig, extra_inputs: &[&Path]) -> Result<Self, CliError> {
        let mut inputs = config
            .inputs
            .iter()
            .map(|p| digest_file(p))
            .collect::<Result<Vec<_>, _>>()?;
        for p in extra_inputs {
            inputs.push(digest_file(p)?);
        }
        Ok(Writer {
            config,
            inputs,
            files: Vec::new(),
        })
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.config.out.join(format!("{}{suffix}", self.config.command.name()))
    }

    fn csv(&mut self, text: &str) -> Result<(), CliError> {
        self.file(".csv", text)
    }

    fn file(&mut self, suffix: &str, text: &str) -> Result<(), CliError> {
        let path = self.path(suffix);
        write_atomic(&path, text.as_bytes())?;
        self.files.push(path);
        Ok(())
    }

    fn json<R: Serialize>(mut self, result: R, reject: Option<bool>) -> Result<Outcome, CliError> {
        let text = render(self.config, &self.inputs, result)?;
        self.file(".json", &text)?;
        Ok(Outcome {
            reject,
            files: self.files,
        })
    }
}

/// Runs one validated configuration.
pub fn dispatch(config: &RunConfig) -> Result<Outcome, CliError> {
    config.validate()?;
    match config.command {
        CommandKind::Depth | CommandKind::Outliers => run_depth(config),
        CommandKind::Mode => run_mode(config),
        CommandKind::Projdepth => run_projdepth(config),
        CommandKind::MmdTest => run_mmd_test(config),
        CommandKind::GaussTest => run_gauss_test(config),
        CommandKind::StudyRate | CommandKind::StudyMode | CommandKind::StudyDiscretized => run_rate_study(config),
        CommandKind::StudyClt => run_clt(config),
        CommandKind::Simulate => run_simulate(config),
    }
}

fn kappa(k: &KernelConfig) -> Result<RadialKappa, CliError> {
    Ok(RadialKappa::with_normalization(RadialFamily::from(k.family), k.h, k.normalized)?)
}

fn cov_path(t: &TransformSpec) -> Option<&Path> {
    match t {
        TransformSpec::Cov(p) => Some(p),
        _ => None,
    }
}

/// Builds the kernel; `sample` supplies the empirical covariance.
fn kernel_spec(k: &KernelConfig, sample: Option<&FunctionalSample>) -> Result<KernelSpec, CliError> {
    let kappa = kappa(k)?;
    Ok(match &k.transform {
        TransformSpec::Identity => KernelSpec::identity(kappa),
        TransformSpec::Cov(p) => KernelSpec::cov_sqrt(kappa, Arc::new(load_cov(p)?)),
        TransformSpec::EmpiricalCov => match sample {
            Some(s) => KernelSpec::cov_sqrt(kappa, Arc::new(empirical_cov(s))),
            None => return usage("empirical-cov needs an input sample"),
        },
    })
}

fn is_plain_identity(k: &KernelSpec) -> bool {
    matches!(k.transform, Transform::Identity { scale } if scale == 1.0)
}

/// Depth of every sample curve under a general kernel, from the Gram matrix.
fn kernel_depths(k: &KernelSpec, s: &FunctionalSample, loo: bool) -> Result<DepthReport, CliError> {
    let n = s.n();
    if loo && n < 2 {
        return Err(kdepth::Error::InvalidArgument("leave-one-out depth needs at least 2 curves".into()).into());
    }
    let g = gram(k, s, s)?;
    let depths = (0..n)
        .map(|i| {
            let row: f64 = g.row(i).iter().sum();
            if loo {
                (row - g[(i, i)]) / (n - 1) as f64
            } else {
                row / n as f64
            }
        })
        .collect();
    Ok(DepthReport::from_depths(depths, DepthMethod::HDepth, k.describe()))
}

fn depth_report(config: &RunConfig, s: &FunctionalSample, loo: bool) -> Result<DepthReport, CliError> {
    let k = kernel_spec(&config.kernel, Some(s))?;
    if is_plain_identity(&k) {
        Ok(if loo { depth_rank_loo(&k.kappa, s)? } else { depth_rank(&k.kappa, s) })
    } else {
        kernel_depths(&k, s, loo)
    }
}

fn depth_rows(report: &DepthReport, flags: Option<&[bool]>) -> Vec<Vec<String>> {
    (0..report.depths.len())
        .map(|i| {
            let mut row = vec![i.to_string(), fmt_f64(report.depths[i]), report.ranks[i].to_string()];
            if let Some(f) = flags {
                row.push(u8::from(f[i]).to_string());
            }
            row
        })
        .collect()
}

fn run_depth(config: &RunConfig) -> Result<Outcome, CliError> {
    let s = load_curves(&config.inputs[0])?;
    let mut w = Writer::new(config, &kernel_files(config))?;
    let report = depth_report(config, &s, config.loo)?;
    if config.command == CommandKind::Outliers {
        let flags = outliers(&report, config.alpha)?;
        w.csv(&render_table(&["index", "depth", "rank", "outlier"], &depth_rows(&report, Some(&flags))))?;
        #[derive(Serialize)]
        struct OutlierResult<'a> {
            report: &'a DepthReport,
            outliers: Vec<usize>,
        }
        let idx = flags.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i).collect();
        w.json(OutlierResult { report: &report, outliers: idx }, None)
    } else {
        w.csv(&render_table(&["index", "depth", "rank"], &depth_rows(&report, None)))?;
        w.json(&report, None)
    }
}

fn kernel_files(config: &RunConfig) -> Vec<&Path> {
    cov_path(&config.kernel.transform).into_iter().collect()
}

fn run_mode(config: &RunConfig) -> Result<Outcome, CliError> {
    let s = load_curves(&config.inputs[0])?;
    let mut w = Writer::new(config, &kernel_files(config))?;
    let k = kernel_spec(&config.kernel, Some(&s))?;
    let (index, depth) = if is_plain_identity(&k) {
        let (i, _, d) = h_mode(&k.kappa, &s);
        (i, d)
    } else {
        let r = kernel_depths(&k, &s, false)?;
        let i = r.ranks.iter().position(|&rank| rank == 1).expect("non-empty sample");
        (i, r.depths[i])
    };
    let mode = s.select(&[index])?;
    w.csv(&render_curves(&mode))?;
    #[derive(Serialize)]
    struct ModeResult {
        index: usize,
        depth: f64,
        kernel: String,
    }
    w.json(
        ModeResult {
            index,
            depth,
            kernel: k.describe(),
        },
        None,
    )
}

fn projection_cov(config: &RunConfig, s: &FunctionalSample) -> Result<CovOperator, CliError> {
    match &config.kernel.transform {
        TransformSpec::Cov(p) => load_cov(p),
        TransformSpec::EmpiricalCov => Ok(empirical_cov(s)),
        TransformSpec::Identity => usage("projdepth needs a covariance operator"),
    }
}

fn run_projdepth(config: &RunConfig) -> Result<Outcome, CliError> {
    let s = load_curves(&config.inputs[0])?;
    let probes = match config.inputs.get(1) {
        Some(p) => load_curves(p)?,
        None => s.clone(),
    };
    let mut w = Writer::new(config, &kernel_files(config))?;
    let c = projection_cov(config, &s)?;
    let (depths, method, kernel) = match config.mproj {
        None => {
            let d = (0..probes.n())
                .map(|i| integrated_depth_closed(&c, &s, &probes.curve(i)))
                .collect::<Result<Vec<_>, _>>()?;
            (d, DepthMethod::IntegratedClosed, "closed form, Gauss profile".to_string())
        }
        Some(m) => {
            // Every probe is integrated against the same directions.
            let kappa1 = RadialKappa::unnormalized(RadialFamily::Se, 1.0)?;
            let nu = GaussianMeasureSpec::centered(c);
            let d = (0..probes.n())
                .map(|i| integrated_depth_mc(&kappa1, &nu, &s, &probes.curve(i), m, config.seed))
                .collect::<Result<Vec<_>, _>>()?;
            (d, DepthMethod::IntegratedMc, format!("Monte Carlo, {m} projections, {kappa1}"))
        }
    };
    let report = DepthReport::from_depths(depths, method, kernel);
    w.csv(&render_table(&["index", "depth", "rank"], &depth_rows(&report, None)))?;
    w.json(&report, None)
}

fn values_matrix(s: &FunctionalSample) -> DMatrix<f64> {
    DMatrix::from_row_slice(s.n(), s.m(), s.as_flat())
}

fn run_mmd_test(config: &RunConfig) -> Result<Outcome, CliError> {
    let x = load_curves(&config.inputs[0])?;
    let y = load_curves(&config.inputs[1])?;
    let w = Writer::new(config, &kernel_files(config))?;
    let report = if config.ecf {
        ecf_two_sample_test(&values_matrix(&x), &values_matrix(&y), config.replicates, config.alpha, config.seed)?
    } else {
        let pooled = x.concat(&y)?;
        let k = kernel_spec(&config.kernel, Some(&pooled))?;
        two_sample_test(&k, &x, &y, config.replicates, config.alpha, config.seed)?
    };
    w.json(TestResult::from(&report), Some(report.reject))
}

fn run_gauss_test(config: &RunConfig) -> Result<Outcome, CliError> {
    let s = load_curves(&config.inputs[0])?;
    let w = Writer::new(config, &kernel_files(config))?;
    let c = match &config.kernel.transform {
        TransformSpec::Cov(p) => load_cov(p)?,
        TransformSpec::EmpiricalCov => unit_trace_cov(&s)?,
        TransformSpec::Identity => return usage("gauss-test needs a weight operator"),
    };
    let report = gaussianity_test(&s, &c, config.replicates, config.alpha, config.seed)?;
    w.json(TestResult::from(&report), Some(report.reject))
}

fn measure(m: &MeasureConfig) -> Result<GaussianMeasureSpec, CliError> {
    match &m.cov {
        None => Ok(reference_gaussian(m.mean_level)?),
        Some(p) => {
            let cov = load_cov(p)?;
            let mean = Curve::constant(cov.grid().clone(), m.mean_level)?;
            Ok(GaussianMeasureSpec::new(mean, cov)?)
        }
    }
}

fn measure_files(config: &RunConfig) -> Vec<&Path> {
    let mut files = kernel_files(config);
    if let Some(p) = config.measure.as_ref().and_then(|m| m.cov.as_deref()) {
        files.push(p);
    }
    files
}

fn study_parts(config: &RunConfig) -> (&MeasureConfig, &StudyConfig) {
    (
        config.measure.as_ref().expect("study commands carry a measure"),
        config.study.as_ref().expect("study commands carry study parameters"),
    )
}

fn rate_rows(t: &RateTable) -> Vec<Vec<String>> {
    (0..t.n_values.len())
        .map(|i| vec![t.n_values[i].to_string(), fmt_f64(t.errors[i]), fmt_f64(t.stderrs[i])])
        .collect()
}

fn run_rate_study(config: &RunConfig) -> Result<Outcome, CliError> {
    let (m, st) = study_parts(config);
    let g = measure(m)?;
    let mut w = Writer::new(config, &measure_files(config))?;
    let (table, size_column) = match config.command {
        CommandKind::StudyRate => {
            let k = kernel_spec(&config.kernel, None)?;
            (rate_sup_error(&g, &k, &st.n_values, st.reps, st.probes, config.seed)?, "n")
        }
        CommandKind::StudyMode => (
            rate_mode(&g, &kappa(&config.kernel)?, &st.n_values, st.reps, config.seed)?,
            "n",
        ),
        _ => {
            let k = kernel_spec(&config.kernel, None)?;
            let rule = st.bandwidth.unwrap_or(BandwidthRule::SpacingMultiple(1.0));
            let t = discretized_consistency(&g, &k, st.n, &st.n_values, st.noise_sd, rule, st.reps, config.seed)?;
            (t, "m_raw")
        }
    };
    w.csv(&render_table(&[size_column, "error", "stderr"], &rate_rows(&table)))?;
    w.json(&table, None)
}

fn run_clt(config: &RunConfig) -> Result<Outcome, CliError> {
    let (m, st) = study_parts(config);
    let g = measure(m)?;
    let mut w = Writer::new(config, &measure_files(config))?;
    let k = kernel_spec(&config.kernel, None)?;
    let x = match &st.probe_curve {
        Some(p) => load_curves(p)?.curve(0),
        None => g.mean.clone(),
    };
    let d = clt_check(&g, &k, &x, st.n, st.reps, config.seed)?;
    let header = [
        "standardized_skewness",
        "excess_kurtosis",
        "qq_correlation",
        "z_mean",
        "z_variance",
        "plugin_variance",
    ];
    let row = [
        d.standardized_skewness,
        d.excess_kurtosis,
        d.qq_correlation,
        d.z_mean,
        d.z_variance,
        d.plugin_variance,
    ]
    .iter()
    .map(|v| fmt_f64(*v))
    .collect();
    w.csv(&render_table(&header, &[row]))?;
    w.json(&d, None)
}

fn run_simulate(config: &RunConfig) -> Result<Outcome, CliError> {
    let (m, st) = study_parts(config);
    let g = measure(m)?;
    let mut w = Writer::new(config, &measure_files(config))?;
    let s = sample_gaussian(&g, st.n, config.seed)?;
    w.csv(&render_curves(&s))?;
    #[derive(Serialize)]
    struct SimulateResult {
        n: usize,
        m: usize,
    }
    w.json(SimulateResult { n: s.n(), m: s.m() }, None)
}
