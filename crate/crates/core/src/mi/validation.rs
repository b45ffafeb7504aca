use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{estimate_mi, EmbeddingMatrix, EmbeddingMeta, MiError, MiOptions};
use crate::rng::{streams, SeededStream};

/// Closed-form MI of a standard bivariate Gaussian with correlation `rho`.
pub fn gaussian_mi(rho: f64) -> f64 {
    -0.5 * (1.0 - rho * rho).ln()
}

/// Absolute tolerance used by [`validate_gaussian`] when none is given:
/// 0.1 nats from m = 1000 samples upward, 0.3 nats below.
pub fn default_tolerance(m: usize) -> f64 {
    if m >= 1000 {
        0.1
    } else {
        0.3
    }
}

/// `m` draws of `(x, rho x + sqrt(1 - rho^2) z)` with standard normal `x`, `z`,
/// as two single-column matrices.
pub fn gaussian_pairs(m: usize, rho: f64, seed: u64) -> (EmbeddingMatrix, EmbeddingMatrix) {
    let mut rng = SeededStream::with_stream(seed, streams::VALIDATE);
    let scale = (1.0 - rho * rho).sqrt();
    let mut xs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    for _ in 0..m {
        let x: f64 = StandardNormal.sample(rng.rng_mut());
        let z: f64 = StandardNormal.sample(rng.rng_mut());
        xs.push(x);
        ys.push(rho * x + scale * z);
    }
    let meta = |name: &str| EmbeddingMeta { model_id: format!("gaussian-{name}"), ..Default::default() };
    (
        EmbeddingMatrix::new(m, 1, xs, meta("x")).expect("finite samples"),
        EmbeddingMatrix::new(m, 1, ys, meta("y")).expect("finite samples"),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub m: usize,
    pub k: usize,
    pub rho: f64,
    pub seed: u64,
    pub estimate: f64,
    pub truth: f64,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Estimates MI on correlated Gaussian pairs and compares with the closed form.
pub fn validate_gaussian(m: usize, k: usize, rho: f64, seed: u64, tolerance: Option<f64>) -> Result<ValidationReport, MiError> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(MiError::InvalidParameters(format!("correlation must lie in (-1, 1), got {rho}")));
    }
    if m <= k {
        return Err(MiError::TooFewSamples { m, k });
    }
    let tolerance = tolerance.unwrap_or_else(|| default_tolerance(m));
    let (a, b) = gaussian_pairs(m, rho, seed);
    let est = estimate_mi(&a, &b, &MiOptions { k, ..Default::default() })?;
    let truth = gaussian_mi(rho);
    let error = est.value - truth;
    Ok(ValidationReport {
        m,
        k,
        rho,
        seed,
        estimate: est.value,
        truth,
        error,
        tolerance,
        pass: error.abs() <= tolerance,
    })
}
