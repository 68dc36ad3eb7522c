//! Functional h-depth through kernel mean embeddings.
//!
//! Curves live on a quadrature [`Grid`]; the h-depth of a curve relative to a
//! sample is the sample's kernel mean embedding evaluated at that curve. On
//! top of that identity the crate provides depth rankings, h-modes,
//! integrated projection depths, closed-form embeddings of Gaussian
//! measures, MMD-based two-sample and Gaussianity tests and Monte Carlo
//! studies of the estimators' convergence.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod depth;
pub mod embedding;
pub mod error;
pub mod funcspace;
pub mod kernels;
pub mod rng;
pub mod study;
pub mod testing;

pub use depth::{
    depth_rank, depth_rank_loo, gaussian_level_set_diameter, h_depth, h_mode, integrated_depth_closed,
    integrated_depth_mc, outliers, DepthMethod, DepthReport,
};
pub use embedding::{
    kme_eval, kme_sq_norm_gaussian, mmd2_spectral_1d, mmd2_u, mmd2_v, sup_witness_gap, DiscreteMeasure,
    EmbeddedMeasure, GaussianEmbedding, MeasureKind,
};
pub use error::{Error, Result};
pub use funcspace::{
    cosine_basis, eigendecompose, empirical_cov, empirical_mean, l2_inner, l2_norm, make_uniform_grid,
    quad_form, reconstruct, sample_gaussian, CovOperator, Curve, Eigenpairs, FunctionalSample,
    GaussianMeasureSpec, Grid,
};
pub use kernels::{
    check_pd, gram, kappa_eval, kernel_eval, Kernel, KernelSpec, PdDiagnostic, RadialFamily, RadialKappa,
    Transform,
};
pub use study::{
    characteristic_witness, clt_check, discretized_consistency, rate_mode, rate_sup_error, reference_gaussian,
    BandwidthRule,
    CltDiagnostic, RateTable,
};
pub use testing::{
    ecf_two_sample_stat, ecf_two_sample_test, gaussianity_statistic, gaussianity_test, two_sample_test,
    TestMethod, TestReport,
};
