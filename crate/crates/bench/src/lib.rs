//! Shared fixtures for the benchmarks.

use kdepth::{reference_gaussian, sample_gaussian, FunctionalSample, GaussianMeasureSpec};

/// Draws `n` curves from the reference Gaussian process with the given mean
/// level.
pub fn reference_sample(n: usize, mean_level: f64, seed: u64) -> FunctionalSample {
    sample_gaussian(&reference_measure(mean_level), n, seed).expect("reference measure is valid")
}

pub fn reference_measure(mean_level: f64) -> GaussianMeasureSpec {
    reference_gaussian(mean_level).expect("reference measure is valid")
}
