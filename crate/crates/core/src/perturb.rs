//! Structure-preserving content perturbation.
//!
//! Selected thoughts keep their reflection markers in place while every other
//! span is swapped for a sentence drawn from a replacement pool. Thought count,
//! marker order and unselected thoughts are untouched.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condense::floor_count;
use crate::rng::{derive_seed, streams, SeededStream};
use crate::trace::{
    is_word_char, read_dataset, segment, write_dataset, CoTExample, DatasetError, FieldMapping, LineFailure,
    ReadMode, ReflectionLexicon, TraceError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Head,
    Middle,
    Tail,
    All,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Head => "head",
            Region::Middle => "middle",
            Region::Tail => "tail",
            Region::All => "all",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PerturbError {
    #[error("fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("sentence pool is empty")]
    EmptyPool,
    #[error("perturbed thought {0} would contain the delimiter")]
    DelimiterCollision(usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Replacement sentences. Sentences containing a lexicon marker are removed
/// at construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePool {
    sentences: Vec<String>,
}

impl SentencePool {
    /// Normalizes whitespace, drops empty and marker-bearing sentences.
    pub fn new<I, S>(sentences: I, lexicon: &ReflectionLexicon) -> Result<Self, PerturbError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let sentences: Vec<String> = sentences
            .into_iter()
            .map(|s| s.as_ref().split_whitespace().collect::<Vec<_>>().join(" "))
            .filter(|s| !s.is_empty() && lexicon.count(s) == 0)
            .collect();
        if sentences.is_empty() {
            return Err(PerturbError::EmptyPool);
        }
        Ok(Self { sentences })
    }

    /// Splits free text into sentences: a sentence ends at `.`, `!` or `?`
    /// followed by whitespace or end of text.
    pub fn from_text(text: &str, lexicon: &ReflectionLexicon) -> Result<Self, PerturbError> {
        Self::new(split_sentences(text), lexicon)
    }

    pub fn from_file(path: impl AsRef<Path>, lexicon: &ReflectionLexicon) -> Result<Self, PerturbError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PerturbError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text, lexicon)
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    fn without(&self, needle: &str) -> Result<Self, PerturbError> {
        let sentences: Vec<String> = self.sentences.iter().filter(|s| !s.contains(needle)).cloned().collect();
        if sentences.is_empty() {
            return Err(PerturbError::EmptyPool);
        }
        Ok(Self { sentences })
    }

    fn draw(&self, rng: &mut SeededStream) -> &str {
        &self.sentences[rng.below(self.sentences.len() as u64) as usize]
    }
}

pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_break = chars.peek().is_none_or(|&(_, next)| next.is_whitespace());
            if at_break {
                let end = i + c.len_utf8();
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s.to_owned());
                }
                start = end;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_owned());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MatchLength {
    /// One sentence per replaced span.
    #[default]
    Off,
    /// Draw sentences until the replacement reaches 70% of the span's length.
    Approximate,
}

#[derive(Debug, Clone)]
pub struct PerturbationConfig {
    pub region: Region,
    /// Fraction of the trace perturbed; ignored for [`Region::All`].
    pub fraction: f64,
    pub lexicon: ReflectionLexicon,
    pub sentence_pool: SentencePool,
    pub seed: u64,
    pub match_length: MatchLength,
}

/// 1-based indices of the thoughts to perturb.
///
/// `middle` is the complement of the edges the edge-preserving plan keeps at
/// ratio `1 - fraction`: with `h = floor((1 - fraction) n / 2)` it is
/// `h+1 ..= n-h`.
pub fn select_perturb_indices(n: usize, region: Region, fraction: f64) -> Result<Vec<usize>, PerturbError> {
    if region == Region::All {
        return Ok((1..=n).collect());
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(PerturbError::InvalidFraction(fraction));
    }
    let k = floor_count(fraction * n as f64).min(n);
    Ok(match region {
        Region::Head => (1..=k).collect(),
        Region::Tail => (n - k + 1..=n).collect(),
        Region::Middle => {
            let h = floor_count((1.0 - fraction) * n as f64 / 2.0).min(n / 2);
            (h + 1..=n - h).collect()
        }
        Region::All => unreachable!(),
    })
}

/// Length ratio a replacement must reach under [`MatchLength::Approximate`].
const MATCH_LOWER: f64 = 0.7;
const MAX_DRAWS_PER_SPAN: usize = 64;

/// Rewrites one thought, keeping reflection markers verbatim.
///
/// A marker keeps any punctuation glued to its right ("Wait," stays whole);
/// overlapping markers merge into one kept span. Every remaining span with
/// non-whitespace content becomes one drawn sentence (or several under
/// [`MatchLength::Approximate`]). Kept and replaced pieces are joined with
/// single spaces.
pub fn perturb_thought(
    thought: &str,
    lexicon: &ReflectionLexicon,
    pool: &SentencePool,
    rng: &mut SeededStream,
    match_length: MatchLength,
) -> String {
    let mut kept: Vec<(usize, usize)> = Vec::new();
    for m in lexicon.find(thought) {
        let glued = thought[m.end..]
            .char_indices()
            .find(|&(_, c)| c.is_whitespace() || is_word_char(c))
            .map_or(thought.len() - m.end, |(i, _)| i);
        let end = m.end + glued;
        match kept.last_mut() {
            Some(last) if m.start <= last.1 => last.1 = last.1.max(end),
            _ => kept.push((m.start, end)),
        }
    }

    let mut pieces: Vec<String> = Vec::with_capacity(2 * kept.len() + 1);
    let mut replace = |span: &str, pieces: &mut Vec<String>| {
        let span = span.trim();
        if span.is_empty() {
            return;
        }
        let mut text = pool.draw(rng).to_owned();
        if match_length == MatchLength::Approximate {
            let target = span.chars().count() as f64 * MATCH_LOWER;
            let mut draws = 1;
            while (text.chars().count() as f64) < target && draws < MAX_DRAWS_PER_SPAN {
                text.push(' ');
                text.push_str(pool.draw(rng));
                draws += 1;
            }
        }
        pieces.push(text);
    };

    let mut cursor = 0;
    for &(start, end) in &kept {
        replace(&thought[cursor..start], &mut pieces);
        pieces.push(thought[start..end].to_owned());
        cursor = end;
    }
    replace(&thought[cursor..], &mut pieces);

    if pieces.is_empty() {
        // Whitespace-only input; thoughts never are, but keep the output non-empty.
        pieces.push(pool.draw(rng).to_owned());
    }
    pieces.join(" ")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub region: Region,
    pub fraction: f64,
    pub seed: u64,
    pub examples_read: usize,
    pub examples_written: usize,
    pub thoughts_total: usize,
    pub thoughts_perturbed: usize,
    /// Marker occurrences in the selected thoughts before perturbation.
    pub markers_before: usize,
    /// Marker occurrences in the same thoughts afterwards.
    pub markers_after: usize,
    pub read_failures: Vec<LineFailure>,
    pub example_failures: Vec<LineFailure>,
    pub elapsed_secs: f64,
}

struct Perturbed {
    example: CoTExample,
    thoughts: usize,
    perturbed: usize,
    markers_before: usize,
    markers_after: usize,
}

fn perturb_one(
    index: usize,
    ex: &CoTExample,
    cfg: &PerturbationConfig,
    pool: &SentencePool,
    delimiter: &str,
) -> Result<Perturbed, PerturbError> {
    let mut trace = segment(&ex.trace, delimiter)?;
    let selected = select_perturb_indices(trace.len(), cfg.region, cfg.fraction)?;
    let mut rng = SeededStream::with_stream(derive_seed(cfg.seed, streams::PERTURB, index as u64), streams::PERTURB);
    let mut markers_before = 0;
    let mut markers_after = 0;
    let thoughts = trace.thoughts_mut();
    for &i in &selected {
        let original = &thoughts[i - 1];
        markers_before += cfg.lexicon.count(original);
        let new = perturb_thought(original, &cfg.lexicon, pool, &mut rng, cfg.match_length);
        if new.contains(delimiter) {
            return Err(PerturbError::DelimiterCollision(i));
        }
        markers_after += cfg.lexicon.count(&new);
        thoughts[i - 1] = new;
    }
    let mut example = ex.clone();
    example.trace = trace.join();
    Ok(Perturbed {
        example,
        thoughts: trace.len(),
        perturbed: selected.len(),
        markers_before,
        markers_after,
    })
}

/// Perturbs every example in memory. Example `i` draws from a stream derived
/// from `(seed, i)`, so results do not depend on scheduling.
pub fn perturb_examples(
    examples: &[CoTExample],
    cfg: &PerturbationConfig,
    delimiter: &str,
) -> Result<(Vec<CoTExample>, PerturbationReport), PerturbError> {
    let start = Instant::now();
    if cfg.region != Region::All && !(cfg.fraction > 0.0 && cfg.fraction <= 1.0) {
        return Err(PerturbError::InvalidFraction(cfg.fraction));
    }
    if delimiter.is_empty() {
        return Err(TraceError::EmptyDelimiter.into());
    }
    let pool = cfg.sentence_pool.without(delimiter)?;
    let results: Vec<Result<Perturbed, PerturbError>> = examples
        .par_iter()
        .enumerate()
        .map(|(i, ex)| perturb_one(i, ex, cfg, &pool, delimiter))
        .collect();

    let mut report = PerturbationReport {
        region: cfg.region,
        fraction: cfg.fraction,
        seed: cfg.seed,
        examples_read: examples.len(),
        examples_written: 0,
        thoughts_total: 0,
        thoughts_perturbed: 0,
        markers_before: 0,
        markers_after: 0,
        read_failures: Vec::new(),
        example_failures: Vec::new(),
        elapsed_secs: 0.0,
    };
    let mut out = Vec::with_capacity(examples.len());
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(p) => {
                report.thoughts_total += p.thoughts;
                report.thoughts_perturbed += p.perturbed;
                report.markers_before += p.markers_before;
                report.markers_after += p.markers_after;
                out.push(p.example);
            }
            Err(e) => {
                log::warn!("example {}: {e}", i + 1);
                report.example_failures.push(LineFailure { line: i + 1, message: e.to_string() });
            }
        }
    }
    report.examples_written = out.len();
    report.elapsed_secs = start.elapsed().as_secs_f64();
    Ok((out, report))
}

/// Reads, perturbs and writes a dataset. Output order equals input order.
pub fn perturb_dataset(
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    cfg: &PerturbationConfig,
    delimiter: &str,
    mapping: &FieldMapping,
    read_mode: ReadMode,
) -> Result<PerturbationReport, PerturbError> {
    let start = Instant::now();
    let read = read_dataset(input, mapping, read_mode)?;
    let (out, mut report) = perturb_examples(&read.examples, cfg, delimiter)?;
    for f in &mut report.example_failures {
        f.line = read.lines[f.line - 1];
    }
    report.read_failures = read.failures;
    write_dataset(output, &out, mapping)?;
    report.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

impl PerturbationConfig {
    pub fn new(region: Region, fraction: f64, lexicon: ReflectionLexicon, sentence_pool: SentencePool, seed: u64) -> Self {
        Self { region, fraction, lexicon, sentence_pool, seed, match_length: MatchLength::Off }
    }
}
