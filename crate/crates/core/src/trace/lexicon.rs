use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TraceError;

/// Markers used when no lexicon file is given. Multi-word cues are token sequences.
pub const DEFAULT_MARKERS: &[&str] = &[
    "wait",
    "hmm",
    "alternatively",
    "but",
    "however",
    "therefore",
    "let me check",
    "actually",
    "on second thought",
];

/// Word characters for boundary matching: alphanumerics and underscore.
pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// A set of reflection markers, matched case-insensitively on word boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionLexicon {
    markers: Vec<Vec<String>>,
}

/// One marker occurrence located in a text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkerMatch {
    /// Index into [`ReflectionLexicon::markers`].
    pub marker: usize,
    /// Byte range from the first to the last character of the matched words.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy)]
struct Word {
    start: usize,
    end: usize,
}

impl ReflectionLexicon {
    /// Builds a lexicon from marker strings; each is split on whitespace into tokens.
    pub fn new<I, S>(markers: I) -> Result<Self, TraceError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out: Vec<Vec<String>> = Vec::new();
        for raw in markers {
            let raw = raw.as_ref();
            let tokens: Vec<String> = raw.split_whitespace().map(str::to_lowercase).collect();
            if tokens.is_empty() {
                return Err(TraceError::InvalidMarker(raw.to_owned()));
            }
            if tokens.iter().any(|t| !t.chars().all(is_word_char)) {
                return Err(TraceError::InvalidMarker(raw.to_owned()));
            }
            if !out.contains(&tokens) {
                out.push(tokens);
            }
        }
        if out.is_empty() {
            return Err(TraceError::EmptyLexicon);
        }
        Ok(Self { markers: out })
    }

    /// Parses the plain-text lexicon format: one marker per line, `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, TraceError> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| TraceError::Io {
            path: path.as_ref().display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn markers(&self) -> &[Vec<String>] {
        &self.markers
    }

    /// Marker `i` rendered as its space-joined token sequence.
    pub fn marker_label(&self, i: usize) -> String {
        self.markers[i].join(" ")
    }

    /// All marker occurrences in `text`, in order of start position.
    ///
    /// At each word position at most one marker matches (the longest). Markers
    /// starting at different positions may overlap and are all reported.
    pub fn find(&self, text: &str) -> Vec<MarkerMatch> {
        let words = split_words(text);
        let lowered: Vec<String> = words.iter().map(|w| text[w.start..w.end].to_lowercase()).collect();
        let mut found = Vec::new();
        for pos in 0..words.len() {
            let mut best: Option<(usize, usize)> = None;
            for (mi, marker) in self.markers.iter().enumerate() {
                let len = marker.len();
                if pos + len > words.len() || best.is_some_and(|(_, l)| l >= len) {
                    continue;
                }
                let tokens_match = marker.iter().zip(&lowered[pos..pos + len]).all(|(a, b)| a == b);
                let contiguous = (pos..pos + len - 1)
                    .all(|w| text[words[w].end..words[w + 1].start].chars().all(char::is_whitespace));
                if tokens_match && contiguous {
                    best = Some((mi, len));
                }
            }
            if let Some((marker, len)) = best {
                found.push(MarkerMatch {
                    marker,
                    start: words[pos].start,
                    end: words[pos + len - 1].end,
                });
            }
        }
        found
    }

    /// Number of marker occurrences in `text`.
    pub fn count(&self, text: &str) -> usize {
        self.find(text).len()
    }

    /// Occurrences per marker label; markers with no hits are included with zero.
    pub fn count_by_marker(&self, text: &str) -> BTreeMap<String, usize> {
        let mut table: BTreeMap<String, usize> =
            (0..self.markers.len()).map(|i| (self.marker_label(i), 0)).collect();
        for m in self.find(text) {
            *table.entry(self.marker_label(m.marker)).or_default() += 1;
        }
        table
    }
}

impl Default for ReflectionLexicon {
    fn default() -> Self {
        Self::new(DEFAULT_MARKERS.iter().copied()).expect("default lexicon is valid")
    }
}

/// Counts reflection-marker occurrences in `text`.
pub fn count_reflection_tokens(text: &str, lexicon: &ReflectionLexicon) -> usize {
    lexicon.count(text)
}

fn split_words(text: &str) -> Vec<Word> {
    let mut words = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (is_word_char(c), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                words.push(Word { start: s, end: i });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        words.push(Word { start: s, end: text.len() });
    }
    words
}
