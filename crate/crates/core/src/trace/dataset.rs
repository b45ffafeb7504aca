use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{THINK_CLOSE, THINK_OPEN};

/// Names of the record fields holding question, trace, answer and id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMapping {
    pub question: String,
    pub trace: String,
    pub answer: String,
    pub id: String,
}

impl Default for FieldMapping {
    fn default() -> Self {
        Self {
            question: "problem".into(),
            trace: "generation".into(),
            answer: "answer".into(),
            id: "id".into(),
        }
    }
}

/// One training record: question, reasoning trace and final answer.
///
/// Fields not named by the [`FieldMapping`] are carried in `extra` and written
/// back unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct CoTExample {
    pub question: String,
    pub trace: String,
    pub answer: String,
    pub id: Option<String>,
    pub extra: Map<String, Value>,
}

impl CoTExample {
    pub fn new(
        question: impl Into<String>,
        trace: impl Into<String>,
        answer: impl Into<String>,
    ) -> Result<Self, RecordError> {
        let ex = Self {
            question: question.into(),
            trace: trace.into(),
            answer: answer.into(),
            id: None,
            extra: Map::new(),
        };
        ex.validate()?;
        Ok(ex)
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        if self.question.trim().is_empty() {
            return Err(RecordError::Invalid("question is empty".into()));
        }
        if self.trace.trim().is_empty() {
            return Err(RecordError::Invalid("trace is empty".into()));
        }
        if let Some(open) = self.trace.find(THINK_OPEN) {
            if !self.trace[open + THINK_OPEN.len()..].contains(THINK_CLOSE) {
                return Err(RecordError::Invalid("`<think>` without matching `</think>`".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("record is not an object")]
    NotAnObject,
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field `{0}` is not a string")]
    NotAString(String),
    #[error("invalid example: {0}")]
    Invalid(String),
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Record {
        line: usize,
        #[source]
        source: RecordError,
    },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadMode {
    /// Stop at the first bad line.
    #[default]
    FailFast,
    /// Skip bad lines and report them.
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineFailure {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ReadOutcome {
    pub examples: Vec<CoTExample>,
    /// 1-based source line of each entry in `examples`.
    pub lines: Vec<usize>,
    pub failures: Vec<LineFailure>,
}

/// Parses one serialized record.
pub fn parse_record(line: &str, mapping: &FieldMapping) -> Result<CoTExample, RecordError> {
    let value: Value = serde_json::from_str(line).map_err(|e| RecordError::Malformed(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(RecordError::NotAnObject);
    };
    let mut take = |name: &str| -> Result<String, RecordError> {
        match obj.shift_remove(name) {
            Some(Value::String(s)) => Ok(s),
            Some(_) => Err(RecordError::NotAString(name.to_owned())),
            None => Err(RecordError::MissingField(name.to_owned())),
        }
    };
    let question = take(&mapping.question)?;
    let trace = take(&mapping.trace)?;
    let answer = take(&mapping.answer)?;
    let id = match obj.shift_remove(&mapping.id) {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s),
        Some(other) => Some(other.to_string()),
    };
    let ex = CoTExample { question, trace, answer, id, extra: obj };
    ex.validate()?;
    Ok(ex)
}

/// Serializes an example as a record object under `mapping`.
pub fn to_record(example: &CoTExample, mapping: &FieldMapping) -> Value {
    let mut obj = Map::with_capacity(example.extra.len() + 4);
    if let Some(id) = &example.id {
        obj.insert(mapping.id.clone(), Value::String(id.clone()));
    }
    obj.insert(mapping.question.clone(), Value::String(example.question.clone()));
    obj.insert(mapping.trace.clone(), Value::String(example.trace.clone()));
    obj.insert(mapping.answer.clone(), Value::String(example.answer.clone()));
    for (k, v) in &example.extra {
        obj.insert(k.clone(), v.clone());
    }
    Value::Object(obj)
}

/// Reads a line-delimited dataset. Blank lines are ignored.
///
/// Lines are read sequentially and parsed in parallel; examples come back in
/// file order.
pub fn read_dataset(path: impl AsRef<Path>, mapping: &FieldMapping, mode: ReadMode) -> Result<ReadOutcome, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }

    let parsed: Vec<(usize, Result<CoTExample, RecordError>)> =
        lines.par_iter().map(|(n, l)| (*n, parse_record(l, mapping))).collect();

    let mut out = ReadOutcome::default();
    for (line, res) in parsed {
        match res {
            Ok(ex) => {
                out.examples.push(ex);
                out.lines.push(line);
            }
            Err(source) => match mode {
                ReadMode::FailFast => return Err(DatasetError::Record { line, source }),
                ReadMode::Skip => {
                    log::warn!("{}:{line}: {source}", path.display());
                    out.failures.push(LineFailure { line, message: source.to_string() });
                }
            },
        }
    }
    Ok(out)
}

/// Writes one record per line and returns the number written.
pub fn write_dataset<'a, I>(path: impl AsRef<Path>, examples: I, mapping: &FieldMapping) -> Result<usize, DatasetError>
where
    I: IntoIterator<Item = &'a CoTExample>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut count = 0;
    for ex in examples {
        serde_json::to_writer(&mut w, &to_record(ex, mapping)).map_err(|e| DatasetError::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| DatasetError::io(path, e))?;
        count += 1;
    }
    w.flush().map_err(|e| DatasetError::io(path, e))?;
    Ok(count)
}
