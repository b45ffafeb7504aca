//! Kraskov k-nearest-neighbor mutual information (first KSG estimator).
//!
//! For each sample `i` the joint radius is the distance to its k-th nearest
//! neighbor under `max(|a_i - a_j|_inf, |b_i - b_j|_inf)`. Marginal counts are
//! the samples strictly closer than that radius in each space, and
//!
//! ```text
//! I = psi(k) + psi(m) - (1/m) sum_i [psi(n_a(i) + 1) + psi(n_b(i) + 1)]
//! ```
//!
//! Neighbors are found by exhaustive O(m^2) search, parallel over `i`. The
//! final sum runs in index order so results do not depend on thread count.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::digamma::digamma_positive;
use super::{EmbeddingMatrix, MiError};
use crate::rng::{streams, SeededStream};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub magnitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiOptions {
    pub k: usize,
    /// Uniform noise in `[-magnitude, magnitude]` added to every entry of both matrices.
    pub jitter: Option<Jitter>,
    /// Standardize every column of both matrices first.
    pub standardize: bool,
    /// Permit the two matrices to have different column counts.
    pub allow_dim_mismatch: bool,
}

impl Default for MiOptions {
    fn default() -> Self {
        Self { k: DEFAULT_K, jitter: None, standardize: false, allow_dim_mismatch: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    /// Mutual information in nats.
    pub value: f64,
    pub k: usize,
    pub m: usize,
    pub d_a: usize,
    pub d_b: usize,
    /// Some joint sample occurs more than once in the input.
    pub duplicates_detected: bool,
    pub jitter_applied: Option<f64>,
    pub standardized: bool,
}

/// Per-sample neighbor statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborStats {
    pub radius: f64,
    pub count_a: usize,
    pub count_b: usize,
}

#[inline]
pub fn chebyshev(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
}

fn check_pair(a: &EmbeddingMatrix, b: &EmbeddingMatrix, k: usize, allow_dim_mismatch: bool) -> Result<(), MiError> {
    if a.rows() != b.rows() {
        return Err(MiError::RowMismatch { a: a.rows(), b: b.rows() });
    }
    if a.cols() != b.cols() && !allow_dim_mismatch {
        return Err(MiError::DimMismatch { a: a.cols(), b: b.cols() });
    }
    if k == 0 {
        return Err(MiError::InvalidK(k));
    }
    if a.rows() < k + 1 {
        return Err(MiError::TooFewSamples { m: a.rows(), k });
    }
    Ok(())
}

/// Distance from row `i` to its k-th nearest joint neighbor.
///
/// Fails with [`MiError::Degenerate`] when the radius is zero, i.e. at least
/// `k` other rows coincide with row `i` in both matrices.
pub fn joint_radius(i: usize, a: &EmbeddingMatrix, b: &EmbeddingMatrix, k: usize) -> Result<f64, MiError> {
    check_pair(a, b, k, true)?;
    let mut joint: Vec<f64> = (0..a.rows())
        .filter(|&j| j != i)
        .map(|j| chebyshev(a.row(i), a.row(j)).max(chebyshev(b.row(i), b.row(j))))
        .collect();
    let (_, rho, _) = joint.select_nth_unstable_by(k - 1, f64::total_cmp);
    if *rho == 0.0 {
        return Err(MiError::Degenerate { row: i });
    }
    Ok(*rho)
}

/// Number of rows `j != i` with `|m_i - m_j|_inf < radius` (strict).
pub fn marginal_count(i: usize, m: &EmbeddingMatrix, radius: f64) -> usize {
    (0..m.rows()).filter(|&j| j != i && chebyshev(m.row(i), m.row(j)) < radius).count()
}

/// Joint radius and both marginal counts for every row.
///
/// Each row costs one pass over the other rows: the two marginal distances
/// are computed once and reused for the radius selection and both counts.
pub fn neighbor_stats(a: &EmbeddingMatrix, b: &EmbeddingMatrix, k: usize) -> Result<Vec<NeighborStats>, MiError> {
    check_pair(a, b, k, true)?;
    let m = a.rows();
    (0..m)
        .into_par_iter()
        .map(|i| {
            let (ai, bi) = (a.row(i), b.row(i));
            let mut da = Vec::with_capacity(m - 1);
            let mut db = Vec::with_capacity(m - 1);
            for j in (0..m).filter(|&j| j != i) {
                da.push(chebyshev(ai, a.row(j)));
                db.push(chebyshev(bi, b.row(j)));
            }
            let mut joint: Vec<f64> = da.iter().zip(&db).map(|(x, y)| x.max(*y)).collect();
            let (_, &mut radius, _) = joint.select_nth_unstable_by(k - 1, f64::total_cmp);
            if radius == 0.0 {
                return Err(MiError::Degenerate { row: i });
            }
            Ok(NeighborStats {
                radius,
                count_a: da.iter().filter(|&&d| d < radius).count(),
                count_b: db.iter().filter(|&&d| d < radius).count(),
            })
        })
        .collect()
}

/// Combines neighbor statistics into the MI value. Summation is in index order.
pub fn mi_from_stats(stats: &[NeighborStats], k: usize) -> f64 {
    let m = stats.len();
    let mut acc = 0.0;
    for s in stats {
        acc += digamma_positive(s.count_a as f64 + 1.0) + digamma_positive(s.count_b as f64 + 1.0);
    }
    digamma_positive(k as f64) + digamma_positive(m as f64) - acc / m as f64
}

fn has_duplicate_rows(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> bool {
    let mut seen = HashSet::with_capacity(a.rows());
    (0..a.rows()).any(|i| {
        let key: Vec<u64> = a.row(i).iter().chain(b.row(i)).map(|v| (v + 0.0).to_bits()).collect();
        !seen.insert(key)
    })
}

fn add_jitter(m: &mut EmbeddingMatrix, magnitude: f64, rng: &mut SeededStream) {
    for v in m.data_mut() {
        *v += magnitude * (2.0 * rng.unit() - 1.0);
    }
}

/// Estimates `I(A; B)` in nats. Row `i` of `a` and `b` must describe the same sample.
pub fn estimate_mi(a: &EmbeddingMatrix, b: &EmbeddingMatrix, opts: &MiOptions) -> Result<MiEstimate, MiError> {
    check_pair(a, b, opts.k, opts.allow_dim_mismatch)?;
    let duplicates = has_duplicate_rows(a, b);
    if duplicates && opts.jitter.is_none() {
        return Err(MiError::Duplicates);
    }

    let (mut a, mut b) = if opts.standardize {
        (a.standardized(), b.standardized())
    } else {
        (a.clone(), b.clone())
    };
    if let Some(j) = opts.jitter {
        if !(j.magnitude > 0.0 && j.magnitude.is_finite()) {
            return Err(MiError::InvalidJitter(j.magnitude));
        }
        let mut rng = SeededStream::with_stream(j.seed, streams::JITTER);
        add_jitter(&mut a, j.magnitude, &mut rng);
        add_jitter(&mut b, j.magnitude, &mut rng);
    }

    let stats = neighbor_stats(&a, &b, opts.k)?;
    let value = mi_from_stats(&stats, opts.k);
    Ok(MiEstimate {
        value,
        k: opts.k,
        m: a.rows(),
        d_a: a.cols(),
        d_b: b.cols(),
        duplicates_detected: duplicates,
        jitter_applied: opts.jitter.map(|j| j.magnitude),
        standardized: opts.standardize,
    })
}
