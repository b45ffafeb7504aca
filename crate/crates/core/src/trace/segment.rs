use serde::{Deserialize, Serialize};

use super::TraceError;

pub const DEFAULT_DELIMITER: &str = "\n\n";
pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";

/// Text surrounding the reasoning interior of a `<think>`-wrapped trace.
///
/// `prefix` runs from the start of the trace through the opening marker and
/// any whitespace after it; `suffix` runs from the whitespace before the
/// closing marker to the end of the trace (including any answer text after
/// `</think>`). Either marker may be absent, in which case its side is just
/// the whitespace that was trimmed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThinkWrapper {
    pub prefix: String,
    pub suffix: String,
}

/// A reasoning trace split into thoughts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThoughtTrace {
    thoughts: Vec<String>,
    delimiter: String,
    wrapper: Option<ThinkWrapper>,
}

impl ThoughtTrace {
    /// Builds a trace from already-split thoughts. Empty thoughts are dropped.
    pub fn new(
        thoughts: Vec<String>,
        delimiter: impl Into<String>,
        wrapper: Option<ThinkWrapper>,
    ) -> Result<Self, TraceError> {
        let delimiter = delimiter.into();
        if delimiter.is_empty() {
            return Err(TraceError::EmptyDelimiter);
        }
        let thoughts: Vec<String> = thoughts.into_iter().filter(|t| !t.trim().is_empty()).collect();
        if thoughts.is_empty() {
            return Err(TraceError::EmptyTrace);
        }
        if let Some(pos) = thoughts.iter().position(|t| t.contains(delimiter.as_str())) {
            return Err(TraceError::DelimiterInThought(pos + 1));
        }
        Ok(Self { thoughts, delimiter, wrapper })
    }

    pub fn thoughts(&self) -> &[String] {
        &self.thoughts
    }

    pub fn delimiter(&self) -> &str {
        &self.delimiter
    }

    pub fn wrapper(&self) -> Option<&ThinkWrapper> {
        self.wrapper.as_ref()
    }

    /// Number of thoughts, always at least one.
    pub fn len(&self) -> usize {
        self.thoughts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Keeps the thoughts at the given 1-based ascending indices.
    pub(crate) fn select(&self, omega: &[usize]) -> Self {
        Self {
            thoughts: omega.iter().map(|&i| self.thoughts[i - 1].clone()).collect(),
            delimiter: self.delimiter.clone(),
            wrapper: self.wrapper.clone(),
        }
    }

    pub(crate) fn thoughts_mut(&mut self) -> &mut [String] {
        &mut self.thoughts
    }

    pub fn join(&self) -> String {
        join(self)
    }
}

/// Splits a raw trace into thoughts on `delimiter`.
///
/// `<think>`/`</think>` markers are moved out of the thought list into a
/// [`ThinkWrapper`] so that indices count only reasoning segments.
pub fn segment(text: &str, delimiter: &str) -> Result<ThoughtTrace, TraceError> {
    if delimiter.is_empty() {
        return Err(TraceError::EmptyDelimiter);
    }
    if text.trim().is_empty() {
        return Err(TraceError::EmptyTrace);
    }

    let (interior, wrapper) = strip_wrapper(text)?;
    let thoughts = interior
        .split(delimiter)
        .filter(|s| !s.trim().is_empty())
        .map(str::to_owned)
        .collect();
    ThoughtTrace::new(thoughts, delimiter, wrapper)
}

/// Concatenates thoughts with the trace delimiter and restores any wrapper.
pub fn join(trace: &ThoughtTrace) -> String {
    let body = trace.thoughts.join(&trace.delimiter);
    match &trace.wrapper {
        Some(w) => {
            let mut out = String::with_capacity(w.prefix.len() + body.len() + w.suffix.len());
            out.push_str(&w.prefix);
            out.push_str(&body);
            out.push_str(&w.suffix);
            out
        }
        None => body,
    }
}

fn strip_wrapper(text: &str) -> Result<(&str, Option<ThinkWrapper>), TraceError> {
    let open = text.find(THINK_OPEN);
    let close = match open {
        Some(o) => {
            let from = o + THINK_OPEN.len();
            match text[from..].find(THINK_CLOSE) {
                Some(c) => Some(from + c),
                None => return Err(TraceError::UnclosedThink),
            }
        }
        None => text.find(THINK_CLOSE),
    };
    if open.is_none() && close.is_none() {
        return Ok((text, None));
    }

    let start = open.map_or(0, |o| o + THINK_OPEN.len());
    let end = close.unwrap_or(text.len());
    let raw = &text[start..end];
    let lead = raw.len() - raw.trim_start().len();
    let interior = raw.trim();
    let inner_start = start + lead;
    let inner_end = inner_start + interior.len();
    let wrapper = ThinkWrapper {
        prefix: text[..inner_start].to_owned(),
        suffix: text[inner_end..].to_owned(),
    };
    Ok((interior, Some(wrapper)))
}
