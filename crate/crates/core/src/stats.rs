//! Dataset-level length and reflection statistics.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::trace::{read_dataset, segment, CoTExample, DatasetError, FieldMapping, LineFailure, ReadMode, ReflectionLexicon};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
    pub total: f64,
}

impl Summary {
    pub fn of(values: &[usize]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2] as f64
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
        };
        let total: usize = sorted.iter().sum();
        Self {
            min: sorted[0] as f64,
            median,
            mean: total as f64 / n as f64,
            max: sorted[n - 1] as f64,
            total: total as f64,
        }
    }
}

/// Token counts are whitespace-separated words, not model tokenizer tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub examples: usize,
    pub thoughts: Summary,
    pub whitespace_tokens: Summary,
    pub characters: Summary,
    pub reflection_tokens: Summary,
    pub marker_frequency: BTreeMap<String, usize>,
    pub read_failures: Vec<LineFailure>,
    /// Examples whose trace could not be segmented; they are excluded from `thoughts` only.
    pub segmentation_failures: Vec<LineFailure>,
}

struct PerExample {
    thoughts: Option<usize>,
    words: usize,
    chars: usize,
    markers: BTreeMap<String, usize>,
}

pub fn compute_stats(examples: &[CoTExample], lexicon: &ReflectionLexicon, delimiter: &str) -> StatsReport {
    let per: Vec<(PerExample, Option<String>)> = examples
        .par_iter()
        .map(|ex| {
            let seg = segment(&ex.trace, delimiter);
            let err = seg.as_ref().err().map(ToString::to_string);
            (
                PerExample {
                    thoughts: seg.ok().map(|t| t.len()),
                    words: ex.trace.split_whitespace().count(),
                    chars: ex.trace.chars().count(),
                    markers: lexicon.count_by_marker(&ex.trace),
                },
                err,
            )
        })
        .collect();

    let mut thoughts = Vec::with_capacity(per.len());
    let mut words = Vec::with_capacity(per.len());
    let mut chars = Vec::with_capacity(per.len());
    let mut reflections = Vec::with_capacity(per.len());
    let mut freq: BTreeMap<String, usize> = (0..lexicon.markers().len()).map(|i| (lexicon.marker_label(i), 0)).collect();
    let mut segmentation_failures = Vec::new();
    for (i, (p, err)) in per.into_iter().enumerate() {
        match p.thoughts {
            Some(n) => thoughts.push(n),
            None => segmentation_failures.push(LineFailure { line: i + 1, message: err.unwrap_or_default() }),
        }
        words.push(p.words);
        chars.push(p.chars);
        reflections.push(p.markers.values().sum());
        for (k, v) in p.markers {
            *freq.entry(k).or_default() += v;
        }
    }

    StatsReport {
        examples: examples.len(),
        thoughts: Summary::of(&thoughts),
        whitespace_tokens: Summary::of(&words),
        characters: Summary::of(&chars),
        reflection_tokens: Summary::of(&reflections),
        marker_frequency: freq,
        read_failures: Vec::new(),
        segmentation_failures,
    }
}

pub fn stats_dataset(
    path: impl AsRef<Path>,
    mapping: &FieldMapping,
    read_mode: ReadMode,
    lexicon: &ReflectionLexicon,
    delimiter: &str,
) -> Result<StatsReport, DatasetError> {
    let read = read_dataset(path, mapping, read_mode)?;
    let mut report = compute_stats(&read.examples, lexicon, delimiter);
    for f in &mut report.segmentation_failures {
        f.line = read.lines[f.line - 1];
    }
    report.read_failures = read.failures;
    Ok(report)
}
