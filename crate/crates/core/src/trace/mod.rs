//! Trace data model: segmentation into thoughts, reflection-marker lexicons,
//! and line-delimited dataset I/O.

mod dataset;
mod lexicon;
mod segment;

pub use dataset::{
    parse_record, read_dataset, to_record, write_dataset, CoTExample, DatasetError, FieldMapping, LineFailure,
    ReadMode, ReadOutcome, RecordError,
};
pub use lexicon::{count_reflection_tokens, MarkerMatch, ReflectionLexicon, DEFAULT_MARKERS};
pub(crate) use lexicon::is_word_char;
pub use segment::{join, segment, ThinkWrapper, ThoughtTrace, DEFAULT_DELIMITER, THINK_CLOSE, THINK_OPEN};

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("delimiter must be non-empty")]
    EmptyDelimiter,
    #[error("trace contains no thoughts")]
    EmptyTrace,
    #[error("`<think>` marker has no matching `</think>`")]
    UnclosedThink,
    #[error("thought {0} contains the delimiter")]
    DelimiterInThought(usize),
    #[error("invalid reflection marker {0:?}: tokens must be non-empty words")]
    InvalidMarker(String),
    #[error("reflection lexicon is empty")]
    EmptyLexicon,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
