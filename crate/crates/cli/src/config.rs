//! Command-line definition and the resolved, validated run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kdepth::study::BandwidthRule;
use kdepth::RadialFamily;
use serde::Serialize;

use crate::error::{usage, CliError};

#[derive(Debug, Parser)]
#[command(name = "kdepth", version, about = "Kernel h-depth, MMD tests and Monte Carlo studies for functional data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Se,
    Imq,
}

impl From<FamilyArg> for RadialFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Se => RadialFamily::Se,
            FamilyArg::Imq => RadialFamily::Imq,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// Radial profile of the kernel.
    #[arg(long, value_enum, default_value = "se")]
    pub kernel: FamilyArg,
    /// Bandwidth h of κ(·/h).
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    /// Operator applied before the norm: identity, cov:<path> or empirical-cov.
    #[arg(long, default_value = "identity")]
    pub transform: String,
    /// Use the normalized profile h⁻¹κ(·/h) instead of κ(·/h).
    #[arg(long)]
    pub h_normalized: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Directory receiving the report files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SeedArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    /// Number of permutation or bootstrap replicates.
    #[arg(long = "B", default_value_t = 199)]
    pub b: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Exit with status 1 when the test rejects.
    #[arg(long)]
    pub exit_on_reject: bool,
}

/// Gaussian measure used by the studies and the simulator: the built-in
/// reference process unless a covariance file is given.
#[derive(Debug, Clone, Args)]
pub struct MeasureArgs {
    /// Covariance kernel file (grid row, then one kernel row per grid point).
    #[arg(long)]
    pub cov: Option<PathBuf>,
    /// Constant level of the mean curve.
    #[arg(long, default_value_t = 0.0)]
    pub mean_level: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// h-depth and rank of every curve in a sample.
    Depth {
        input: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        /// Leave each curve out of its own depth.
        #[arg(long)]
        loo: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Depths plus a flag for curves below the alpha depth quantile.
    Outliers {
        input: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// The deepest sample curve.
    Mode {
        input: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Integrated projection depth, in closed form or by Monte Carlo.
    Projdepth {
        input: PathBuf,
        /// Curves to evaluate (default: the sample itself).
        #[arg(long)]
        probes: Option<PathBuf>,
        /// Covariance of the projection measure: cov:<path> or empirical-cov.
        #[arg(long, default_value = "empirical-cov")]
        transform: String,
        /// Monte Carlo projections; closed form when absent.
        #[arg(long)]
        mproj: Option<usize>,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Permutation two-sample test.
    MmdTest {
        x: PathBuf,
        y: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        /// Use the unweighted Euclidean characteristic-function statistic on
        /// the raw grid values.
        #[arg(long)]
        ecf: bool,
        #[command(flatten)]
        test: TestArgs,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Gaussianity test with parametric bootstrap calibration.
    GaussTest {
        input: PathBuf,
        /// Weight operator: empirical-cov (unit trace) or cov:<path>.
        #[arg(long, default_value = "empirical-cov")]
        transform: String,
        #[command(flatten)]
        test: TestArgs,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Sup-probe error of the empirical embedding against sample size.
    StudyRate {
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,400,800,1600")]
        n_values: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(long, default_value_t = 20)]
        probes: usize,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Distance of the sample h-mode to the mean against sample size.
    StudyMode {
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,400,800,1600")]
        n_values: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Pointwise CLT diagnostics of the empirical embedding.
    StudyClt {
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        /// Curve file whose first curve is the probe (default: the mean).
        #[arg(long)]
        probe: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Embedding error from noisy discrete observation against raw grid size.
    StudyDiscretized {
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128")]
        raw_counts: Vec<usize>,
        #[arg(long, default_value_t = 0.1)]
        noise_sd: f64,
        /// Fixed smoothing bandwidth (default: one raw sampling interval).
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Draws curves from the Gaussian measure and writes them as curve CSV.
    Simulate {
        #[command(flatten)]
        measure: MeasureArgs,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Depth,
    Outliers,
    Mode,
    Projdepth,
    MmdTest,
    GaussTest,
    StudyRate,
    StudyMode,
    StudyClt,
    StudyDiscretized,
    Simulate,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Depth => "depth",
            CommandKind::Outliers => "outliers",
            CommandKind::Mode => "mode",
            CommandKind::Projdepth => "projdepth",
            CommandKind::MmdTest => "mmd-test",
            CommandKind::GaussTest => "gauss-test",
            CommandKind::StudyRate => "study-rate",
            CommandKind::StudyMode => "study-mode",
            CommandKind::StudyClt => "study-clt",
            CommandKind::StudyDiscretized => "study-discretized",
            CommandKind::Simulate => "simulate",
        }
    }
}

/// Parsed `--transform` value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformSpec {
    Identity,
    Cov(PathBuf),
    EmpiricalCov,
}

impl TransformSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "identity" => Ok(TransformSpec::Identity),
            "empirical-cov" => Ok(TransformSpec::EmpiricalCov),
            _ => match s.strip_prefix("cov:") {
                Some(p) if !p.is_empty() => Ok(TransformSpec::Cov(PathBuf::from(p))),
                _ => usage(format!(
                    "invalid --transform `{s}`; expected identity, cov:<path> or empirical-cov"
                )),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelConfig {
    pub family: FamilyArg,
    pub h: f64,
    pub normalized: bool,
    pub transform: TransformSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureConfig {
    /// `None` selects the built-in reference process.
    pub cov: Option<PathBuf>,
    pub mean_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub probes: usize,
    pub n: usize,
    pub noise_sd: f64,
    pub bandwidth: Option<BandwidthRule>,
    pub probe_curve: Option<PathBuf>,
}

/// Fully resolved configuration of one invocation; embedded in every JSON
/// report and hashed to identify the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub kernel: KernelConfig,
    pub seed: u64,
    #[serde(rename = "B")]
    pub replicates: usize,
    pub alpha: f64,
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    pub measure: Option<MeasureConfig>,
    pub study: Option<StudyConfig>,
    pub mproj: Option<usize>,
    pub ecf: bool,
    pub loo: bool,
    pub exit_on_reject: bool,
}

const DEFAULT_B: usize = 199;
const DEFAULT_ALPHA: f64 = 0.05;

fn kernel_config(k: &KernelArgs) -> Result<KernelConfig, CliError> {
    Ok(KernelConfig {
        family: k.kernel,
        h: k.h,
        normalized: k.h_normalized,
        transform: TransformSpec::parse(&k.transform)?,
    })
}

fn default_kernel() -> KernelConfig {
    KernelConfig {
        family: FamilyArg::Se,
        h: 1.0,
        normalized: false,
        transform: TransformSpec::Identity,
    }
}

fn measure_config(m: &MeasureArgs) -> MeasureConfig {
    MeasureConfig {
        cov: m.cov.clone(),
        mean_level: m.mean_level,
    }
}

impl RunConfig {
    fn base(command: CommandKind, out: &OutArgs) -> Self {
        RunConfig {
            command,
            kernel: default_kernel(),
            seed: 0,
            replicates: DEFAULT_B,
            alpha: DEFAULT_ALPHA,
            inputs: Vec::new(),
            out: out.out.clone(),
            measure: None,
            study: None,
            mproj: None,
            ecf: false,
            loo: false,
            exit_on_reject: false,
        }
    }

    fn study(n_values: Vec<usize>, reps: usize) -> StudyConfig {
        StudyConfig {
            n_values,
            reps,
            probes: 0,
            n: 0,
            noise_sd: 0.0,
            bandwidth: None,
            probe_curve: None,
        }
    }

    /// Resolves a parsed command line into a validated configuration.
    pub fn from_command(cmd: &Command) -> Result<Self, CliError> {
        let cfg = match cmd {
            Command::Depth { input, kernel, loo, out } => RunConfig {
                kernel: kernel_config(kernel)?,
                inputs: vec![input.clone()],
                loo: *loo,
                ..RunConfig::base(CommandKind::Depth, out)
            },
            Command::Outliers { input, kernel, alpha, out } => RunConfig {
                kernel: kernel_config(kernel)?,
                inputs: vec![input.clone()],
                alpha: *alpha,
                ..RunConfig::base(CommandKind::Outliers, out)
            },
            Command::Mode { input, kernel, out } => RunConfig {
                kernel: kernel_config(kernel)?,
                inputs: vec![input.clone()],
                ..RunConfig::base(CommandKind::Mode, out)
            },
            Command::Projdepth { input, probes, transform, mproj, seed, out } => {
                let mut inputs = vec![input.clone()];
                inputs.extend(probes.clone());
                RunConfig {
                    kernel: KernelConfig {
                        transform: TransformSpec::parse(transform)?,
                        ..default_kernel()
                    },
                    inputs,
                    mproj: *mproj,
                    seed: seed.seed,
                    ..RunConfig::base(CommandKind::Projdepth, out)
                }
            }
            Command::MmdTest { x, y, kernel, ecf, test, seed, out } => RunConfig {
                kernel: kernel_config(kernel)?,
                inputs: vec![x.clone(), y.clone()],
                ecf: *ecf,
                replicates: test.b,
                alpha: test.alpha,
                exit_on_reject: test.exit_on_reject,
                seed: seed.seed,
                ..RunConfig::base(CommandKind::MmdTest, out)
            },
            Command::GaussTest { input, transform, test, seed, out } => RunConfig {
                kernel: KernelConfig {
                    transform: TransformSpec::parse(transform)?,
                    ..default_kernel()
                },
                inputs: vec![input.clone()],
                replicates: test.b,
                alpha: test.alpha,
                exit_on_reject: test.exit_on_reject,
                seed: seed.seed,
                ..RunConfig::base(CommandKind::GaussTest, out)
            },
            Command::StudyRate { measure, kernel, n_values, reps, probes, seed, out } => RunConfig {
                kernel: kernel_config(kernel)?,
                measure: Some(measure_config(measure)),
                study: Some(StudyConfig {
                    probes: *probes,
                    ..RunConfig::study(n_values.clone(), *reps)
                }),
                seed: seed.seed,
                ..RunConfig::base(CommandKind::StudyRate, out)
            },
            Command::StudyMode { measure, kernel, n_values, reps, seed, out } => RunConfig {
                kernel: kernel_config(kernel)?,
                measure: Some(measure_config(measure)),
                study: Some(RunConfig::study(n_values.clone(), *reps)),
                seed: seed.seed,
                ..RunConfig::base(CommandKind::StudyMode, out)
            },
            Command::StudyClt { measure, kernel, probe, n, reps, seed, out } => RunConfig {
                kernel: kernel_config(kernel)?,
                measure: Some(measure_config(measure)),
                study: Some(StudyConfig {
                    n: *n,
                    probe_curve: probe.clone(),
                    ..RunConfig::study(Vec::new(), *reps)
                }),
                inputs: probe.iter().cloned().collect(),
                seed: seed.seed,
                ..RunConfig::base(CommandKind::StudyClt, out)
            },
            Command::StudyDiscretized { measure, kernel, n, raw_counts, noise_sd, bandwidth, reps, seed, out } => {
                RunConfig {
                    kernel: kernel_config(kernel)?,
                    measure: Some(measure_config(measure)),
                    study: Some(StudyConfig {
                        n: *n,
                        noise_sd: *noise_sd,
                        bandwidth: Some(match bandwidth {
                            Some(h) => BandwidthRule::Fixed(*h),
                            None => BandwidthRule::SpacingMultiple(1.0),
                        }),
                        ..RunConfig::study(raw_counts.clone(), *reps)
                    }),
                    seed: seed.seed,
                    ..RunConfig::base(CommandKind::StudyDiscretized, out)
                }
            }
            Command::Simulate { measure, n, seed, out } => RunConfig {
                measure: Some(measure_config(measure)),
                study: Some(StudyConfig {
                    n: *n,
                    ..RunConfig::study(Vec::new(), 0)
                }),
                seed: seed.seed,
                ..RunConfig::base(CommandKind::Simulate, out)
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field that can be checked without reading data.
    pub fn validate(&self) -> Result<(), CliError> {
        let k = &self.kernel;
        if !(k.h > 0.0) || !k.h.is_finite() {
            return usage(format!("--h must be positive and finite, got {}", k.h));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return usage(format!("--alpha must lie in (0, 1), got {}", self.alpha));
        }
        let is_test = matches!(self.command, CommandKind::MmdTest | CommandKind::GaussTest);
        if is_test && self.replicates < kdepth::testing::MIN_REPLICATES {
            return usage(format!(
                "--B must be at least {}, got {}",
                kdepth::testing::MIN_REPLICATES,
                self.replicates
            ));
        }
        if self.mproj == Some(0) {
            return usage("--mproj must be at least 1");
        }
        let needs_operator = matches!(self.command, CommandKind::GaussTest | CommandKind::Projdepth);
        if needs_operator && k.transform == TransformSpec::Identity {
            return usage(format!(
                "{} needs a covariance operator: use --transform empirical-cov or cov:<path>",
                self.command.name()
            ));
        }
        let is_study = matches!(
            self.command,
            CommandKind::StudyRate | CommandKind::StudyMode | CommandKind::StudyClt | CommandKind::StudyDiscretized
        );
        if is_study {
            if k.family != FamilyArg::Se {
                return usage(format!(
                    "{} compares against closed-form Gaussian embeddings, which need --kernel se",
                    self.command.name()
                ));
            }
            if k.transform == TransformSpec::EmpiricalCov {
                return usage("studies have no input sample: use --transform identity or cov:<path>");
            }
            if self.command == CommandKind::StudyMode && k.transform != TransformSpec::Identity {
                return usage("study-mode works with the identity transform only");
            }
        }
        if let Some(st) = &self.study {
            self.validate_study(st)?;
        }
        Ok(())
    }

    fn validate_study(&self, st: &StudyConfig) -> Result<(), CliError> {
        let increasing = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]);
        match self.command {
            CommandKind::StudyRate | CommandKind::StudyMode => {
                if st.n_values.len() < 3 || !increasing(&st.n_values) || st.n_values[0] == 0 {
                    return usage("--n-values needs at least 3 strictly increasing positive counts");
                }
                if st.reps == 0 {
                    return usage("--reps must be at least 1");
                }
            }
            CommandKind::StudyClt => {
                if st.reps < kdepth::study::CLT_MIN_REPS {
                    return usage(format!("--reps must be at least {}", kdepth::study::CLT_MIN_REPS));
                }
                if st.n < 2 {
                    return usage("--n must be at least 2");
                }
            }
            CommandKind::StudyDiscretized => {
                if st.n_values.len() < 2 || !increasing(&st.n_values) || st.n_values[0] < 2 {
                    return usage("--raw-counts needs at least 2 strictly increasing counts, each at least 2");
                }
                if st.reps == 0 || st.n == 0 {
                    return usage("--reps and --n must be at least 1");
                }
                if !(st.noise_sd >= 0.0) || !st.noise_sd.is_finite() {
                    return usage("--noise-sd must be non-negative");
                }
                if let Some(BandwidthRule::Fixed(h)) = st.bandwidth {
                    if !(h > 0.0) || !h.is_finite() {
                        return usage("--bandwidth must be positive");
                    }
                }
            }
            CommandKind::Simulate
                if st.n == 0 => {
                    return usage("--n must be at least 1");
                }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, CliError> {
        let mut full = vec!["kdepth"];
        full.extend_from_slice(args);
        let cli = Cli::try_parse_from(full).map_err(|e| CliError::Usage(e.to_string()))?;
        RunConfig::from_command(&cli.command)
    }

    #[test]
    fn test_defaults() {
        let c = parse(&["mmd-test", "a.csv", "b.csv"]).unwrap();
        assert_eq!(c.kernel, default_kernel());
        assert_eq!(c.seed, 0);
        assert_eq!(c.replicates, 199);
        assert_eq!(c.alpha, 0.05);
        assert_eq!(c.out, PathBuf::from("."));
    }

    #[test]
    fn test_transform_parsing() {
        assert_eq!(TransformSpec::parse("identity").unwrap(), TransformSpec::Identity);
        assert_eq!(TransformSpec::parse("empirical-cov").unwrap(), TransformSpec::EmpiricalCov);
        assert_eq!(TransformSpec::parse("cov:c.csv").unwrap(), TransformSpec::Cov("c.csv".into()));
        assert!(matches!(TransformSpec::parse("cov:"), Err(CliError::Usage(_))));
        assert!(matches!(TransformSpec::parse("sqrt"), Err(CliError::Usage(_))));
    }

    #[test]
    fn test_validation_errors_are_usage() {
        for args in [
            vec!["depth", "a.csv", "--h", "0"],
            vec!["outliers", "a.csv", "--alpha", "1.5"],
            vec!["mmd-test", "a.csv", "b.csv", "--B", "10"],
            vec!["gauss-test", "a.csv", "--transform", "identity"],
            vec!["study-rate", "--kernel", "imq"],
            vec!["study-rate", "--n-values", "10,20"],
            vec!["study-clt", "--reps", "100"],
            vec!["projdepth", "a.csv", "--mproj", "0"],
            vec!["frobnicate"],
        ] {
            assert!(matches!(parse(&args), Err(CliError::Usage(_))), "{args:?}");
        }
    }

    #[test]
    fn test_study_lists() {
        let c = parse(&["study-discretized", "--raw-counts", "4,8", "--bandwidth", "0.1"]).unwrap();
        let st = c.study.unwrap();
        assert_eq!(st.n_values, vec![4, 8]);
        assert_eq!(st.bandwidth, Some(BandwidthRule::Fixed(0.1)));
    }
}
