//! Thought-level condensation: index-set planning for the edge-preserving
//! strategy and its positional/random baselines, and dataset application.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, streams, SeededStream};
use crate::trace::{
    read_dataset, segment, write_dataset, CoTExample, DatasetError, FieldMapping, LineFailure, ReadMode, ThoughtTrace,
    TraceError, DEFAULT_DELIMITER,
};

/// Absolute slack added before flooring `tau * n`, so decimal ratios such as
/// 0.29 * 100 floor to 29 rather than 28.
const FLOOR_EPS: f64 = 1e-9;

pub(crate) fn floor_count(x: f64) -> usize {
    (x + FLOOR_EPS).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Keep the first and last floor(tau*n/2) thoughts.
    Epic,
    /// Keep the first floor(tau*n) thoughts.
    Hoc,
    /// Keep the last floor(tau*n) thoughts.
    Toc,
    /// Keep a centered block.
    Moc,
    /// Keep a seeded uniform sample of max(1, floor(tau*n)) thoughts.
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Strategy::Epic, Strategy::Hoc, Strategy::Toc, Strategy::Moc, Strategy::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Epic => "epic",
            Strategy::Hoc => "hoc",
            Strategy::Toc => "toc",
            Strategy::Moc => "moc",
            Strategy::Random => "random",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = CondenseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| CondenseError::UnknownStrategy(s.to_owned()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CondenseError {
    #[error("ratio must lie in (0, 1], got {0}")]
    InvalidRatio(f64),
    #[error("thought count must be at least 1")]
    ZeroThoughts,
    #[error("the random strategy requires a seed")]
    MissingSeed,
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("plan is for {plan} thoughts but the trace has {trace}")]
    LengthMismatch { plan: usize, trace: usize },
    #[error("{strategy} at ratio {tau} selects no thoughts out of {n} and min-keep is off")]
    EmptySelection { strategy: Strategy, tau: f64, n: usize },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// The selected index set for one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensationPlan {
    pub strategy: Strategy,
    pub tau: f64,
    pub n: usize,
    /// Ascending 1-based indices of retained thoughts.
    pub omega: Vec<usize>,
    pub seed: Option<u64>,
    /// floor(tau * n), the count implied by the prose definition of the ratio.
    pub nominal_retained: usize,
    /// The formula selected nothing and the min-keep rule supplied indices.
    pub fallback: bool,
}

impl CondensationPlan {
    pub fn retained(&self) -> usize {
        self.omega.len()
    }
}

/// Computes the retained index set with the min-keep fallback enabled.
pub fn plan_indices(n: usize, tau: f64, strategy: Strategy, seed: Option<u64>) -> Result<CondensationPlan, CondenseError> {
    plan_indices_with(n, tau, strategy, seed, true)
}

/// Computes the retained index set.
///
/// `tau == 1` always keeps every thought. When a formula selects nothing and
/// `min_keep` is set, boundary thoughts are kept instead and `fallback` is
/// flagged: epic keeps `{1, n}`, hoc `{1}`, toc `{n}`, moc the middle index
/// `ceil(n/2)`. Random always keeps `max(1, floor(tau*n))` and flags when the
/// floor was zero. A seed passed to a positional strategy is ignored.
pub fn plan_indices_with(
    n: usize,
    tau: f64,
    strategy: Strategy,
    seed: Option<u64>,
    min_keep: bool,
) -> Result<CondensationPlan, CondenseError> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(CondenseError::InvalidRatio(tau));
    }
    if n == 0 {
        return Err(CondenseError::ZeroThoughts);
    }
    if strategy == Strategy::Random && seed.is_none() {
        return Err(CondenseError::MissingSeed);
    }

    let nominal = floor_count(tau * n as f64).min(n);
    let mut plan = CondensationPlan {
        strategy,
        tau,
        n,
        omega: Vec::new(),
        seed: if strategy == Strategy::Random { seed } else { None },
        nominal_retained: nominal,
        fallback: false,
    };
    if tau == 1.0 {
        plan.omega = (1..=n).collect();
        return Ok(plan);
    }

    let (omega, fallback): (Vec<usize>, Vec<usize>) = match strategy {
        Strategy::Epic => {
            let h = floor_count(tau * n as f64 / 2.0).min(n / 2);
            let omega = (1..=h).chain(n - h + 1..=n).collect();
            let fallback = if n == 1 { vec![1] } else { vec![1, n] };
            (omega, fallback)
        }
        Strategy::Hoc => ((1..=nominal).collect(), vec![1]),
        Strategy::Toc => ((n - nominal + 1..=n).collect(), vec![n]),
        Strategy::Moc => {
            let h = floor_count((1.0 - tau) * n as f64 / 2.0);
            let omega = if 2 * h < n { (h + 1..=n - h).collect() } else { Vec::new() };
            (omega, vec![n.div_ceil(2)])
        }
        Strategy::Random => {
            let count = nominal.max(1);
            let mut rng = SeededStream::with_stream(seed.unwrap_or_default(), streams::CONDENSE);
            let omega = rng.sample_indices(n, count);
            plan.fallback = nominal == 0;
            (omega, Vec::new())
        }
    };

    if omega.is_empty() {
        if !min_keep {
            return Err(CondenseError::EmptySelection { strategy, tau, n });
        }
        plan.omega = fallback;
        plan.fallback = true;
    } else {
        plan.omega = omega;
    }
    Ok(plan)
}

/// Keeps the thoughts selected by `plan`, in ascending order.
pub fn apply(trace: &ThoughtTrace, plan: &CondensationPlan) -> Result<ThoughtTrace, CondenseError> {
    if plan.n != trace.len() {
        return Err(CondenseError::LengthMismatch { plan: plan.n, trace: trace.len() });
    }
    Ok(trace.select(&plan.omega))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondenseConfig {
    pub strategy: Strategy,
    pub tau: f64,
    pub delimiter: String,
    /// Base seed; each example's random plan uses a seed derived from it and the example index.
    pub seed: Option<u64>,
    pub mapping: FieldMapping,
    pub min_keep: bool,
    pub read_mode: ReadMode,
    /// Abort on the first example that fails to segment or condense.
    pub fail_on_example_error: bool,
}

impl Default for CondenseConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Epic,
            tau: 0.5,
            delimiter: DEFAULT_DELIMITER.into(),
            seed: None,
            mapping: FieldMapping::default(),
            min_keep: true,
            read_mode: ReadMode::FailFast,
            fail_on_example_error: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondensationReport {
    pub strategy: Strategy,
    pub tau: f64,
    pub examples_read: usize,
    pub examples_written: usize,
    pub thoughts_before: usize,
    pub thoughts_after: usize,
    /// thoughts_after / thoughts_before over written examples.
    pub retention: f64,
    pub fallback_count: usize,
    /// Thought count before condensation -> number of examples.
    pub thoughts_before_histogram: BTreeMap<usize, usize>,
    pub thoughts_after_histogram: BTreeMap<usize, usize>,
    pub read_failures: Vec<LineFailure>,
    pub example_failures: Vec<LineFailure>,
    pub elapsed_secs: f64,
}

struct Condensed {
    example: CoTExample,
    before: usize,
    after: usize,
    fallback: bool,
}

fn condense_one(index: usize, ex: &CoTExample, cfg: &CondenseConfig) -> Result<Condensed, CondenseError> {
    let trace = segment(&ex.trace, &cfg.delimiter)?;
    let seed = match cfg.strategy {
        Strategy::Random => Some(derive_seed(cfg.seed.ok_or(CondenseError::MissingSeed)?, streams::CONDENSE, index as u64)),
        _ => None,
    };
    let plan = plan_indices_with(trace.len(), cfg.tau, cfg.strategy, seed, cfg.min_keep)?;
    let kept = apply(&trace, &plan)?;
    let mut example = ex.clone();
    example.trace = kept.join();
    Ok(Condensed { example, before: plan.n, after: plan.retained(), fallback: plan.fallback })
}

/// Condenses every example in memory. Failures carry the example's position
/// (1-based) in `examples`.
pub fn condense_examples(
    examples: &[CoTExample],
    cfg: &CondenseConfig,
) -> Result<(Vec<CoTExample>, CondensationReport), CondenseError> {
    let start = Instant::now();
    if !(cfg.tau > 0.0 && cfg.tau <= 1.0) {
        return Err(CondenseError::InvalidRatio(cfg.tau));
    }
    if cfg.strategy == Strategy::Random && cfg.seed.is_none() {
        return Err(CondenseError::MissingSeed);
    }
    let results: Vec<Result<Condensed, CondenseError>> =
        examples.par_iter().enumerate().map(|(i, ex)| condense_one(i, ex, cfg)).collect();

    let mut report = CondensationReport {
        strategy: cfg.strategy,
        tau: cfg.tau,
        examples_read: examples.len(),
        examples_written: 0,
        thoughts_before: 0,
        thoughts_after: 0,
        retention: 0.0,
        fallback_count: 0,
        thoughts_before_histogram: BTreeMap::new(),
        thoughts_after_histogram: BTreeMap::new(),
        read_failures: Vec::new(),
        example_failures: Vec::new(),
        elapsed_secs: 0.0,
    };
    let mut out = Vec::with_capacity(examples.len());
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(c) => {
                report.thoughts_before += c.before;
                report.thoughts_after += c.after;
                report.fallback_count += usize::from(c.fallback);
                *report.thoughts_before_histogram.entry(c.before).or_default() += 1;
                *report.thoughts_after_histogram.entry(c.after).or_default() += 1;
                out.push(c.example);
            }
            Err(e) if cfg.fail_on_example_error => return Err(e),
            Err(e) => {
                log::warn!("example {}: {e}", i + 1);
                report.example_failures.push(LineFailure { line: i + 1, message: e.to_string() });
            }
        }
    }
    report.examples_written = out.len();
    if report.thoughts_before > 0 {
        report.retention = report.thoughts_after as f64 / report.thoughts_before as f64;
    }
    report.elapsed_secs = start.elapsed().as_secs_f64();
    Ok((out, report))
}

/// Reads, condenses and writes a dataset. Output order equals input order.
pub fn condense_dataset(
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    cfg: &CondenseConfig,
) -> Result<CondensationReport, CondenseError> {
    let start = Instant::now();
    let read = read_dataset(input, &cfg.mapping, cfg.read_mode)?;
    let (condensed, mut report) = condense_examples(&read.examples, cfg)?;
    for f in &mut report.example_failures {
        f.line = read.lines[f.line - 1];
    }
    report.read_failures = read.failures;
    write_dataset(output, &condensed, &cfg.mapping)?;
    report.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(report)
}
