// SPDX-License-Identifier: Apache-2.0

//! Trace format v1: one JSON object per line, a meta header first.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::slicing::{ObjectId, ParameterInstance, ParametricEvent, ParametricTrace};
use crate::spec::action::Value;
use crate::spec::Position;

pub const FORMAT: &str = "rvtrace";
pub const VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot read trace: {0}")]
    Io(#[from] io::Error),
    #[error("unsupported trace format `{0}`")]
    Format(String),
    #[error("unsupported trace version `{found}` (expected major version {VERSION})")]
    Version { found: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl TraceError {
    pub fn is_fatal(&self) -> bool {
        !matches!(self, TraceError::Malformed { .. })
    }
}

/// Event payload scalar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl Scalar {
    pub fn to_value(&self) -> Value {
        match self {
            Scalar::Bool(b) => Value::Bool(*b),
            Scalar::Int(i) => Value::Int(*i),
            Scalar::Float(f) => Value::Str(f.to_string().into()),
            Scalar::Str(s) => Value::Str(s.as_str().into()),
        }
    }
}

impl Serialize for Position {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Position {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Position::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown position `{s}`")))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub producer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<serde_json::Value>,
}

impl MetaRecord {
    pub fn header(producer: &str) -> Self {
        MetaRecord {
            format: Some(FORMAT.into()),
            version: Some(VERSION.into()),
            producer: Some(producer.into()),
            ..Default::default()
        }
    }

    fn is_header(&self) -> bool {
        self.format.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub seq: u64,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<Position>,
    /// Selector that matched: `(module-path, callable-name)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sel: Option<(String, String)>,
    /// Parameter name to `Type#token`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fields: BTreeMap<String, Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<(String, u32)>,
}

impl EventRecord {
    pub fn new(seq: u64, name: impl Into<String>) -> Self {
        EventRecord {
            seq,
            name: name.into(),
            pos: None,
            sel: None,
            params: BTreeMap::new(),
            fields: BTreeMap::new(),
            src: None,
        }
    }

    pub fn param(mut self, name: impl Into<String>, token: impl Into<String>) -> Self {
        self.params.insert(name.into(), token.into());
        self
    }

    pub fn field(mut self, name: impl Into<String>, value: Scalar) -> Self {
        self.fields.insert(name.into(), value);
        self
    }

    pub fn at(mut self, file: impl Into<String>, line: u32) -> Self {
        self.src = Some((file.into(), line));
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeathRecord {
    pub seq: u64,
    pub objects: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TraceRecord {
    Meta(MetaRecord),
    Event(EventRecord),
    Death(DeathRecord),
}

impl TraceRecord {
    pub fn seq(&self) -> Option<u64> {
        match self {
            TraceRecord::Meta(_) => None,
            TraceRecord::Event(e) => Some(e.seq),
            TraceRecord::Death(d) => Some(d.seq),
        }
    }
}

impl EventRecord {
    /// The event as a parametric event; tokens must be well formed.
    pub fn to_parametric(&self) -> ParametricEvent {
        let theta = ParameterInstance::from_pairs(self.params.iter().map(|(k, v)| {
            let obj = ObjectId::parse(v).unwrap_or_else(|| ObjectId::new("object", v.as_str()));
            (k.as_str(), obj)
        }));
        ParametricEvent::new(self.name.as_str(), theta)
    }
}

/// The event records of a trace as a parametric trace.
pub fn to_parametric(records: &[TraceRecord]) -> ParametricTrace {
    records
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Event(e) => Some(e.to_parametric()),
            _ => None,
        })
        .collect()
}

fn check_token(token: &str) -> Result<(), String> {
    ObjectId::parse(token)
        .map(|_| ())
        .ok_or_else(|| format!("object token `{token}` is not of the form Type#id"))
}

fn validate(record: &TraceRecord) -> Result<(), String> {
    match record {
        TraceRecord::Meta(_) => Ok(()),
        TraceRecord::Event(e) => {
            if e.name.is_empty() {
                return Err("event name is empty".into());
            }
            e.params.values().try_for_each(|t| check_token(t))
        }
        TraceRecord::Death(d) => d.objects.iter().try_for_each(|t| check_token(t)),
    }
}

/// Checks a header's format tag and major version.
pub fn check_header(meta: &MetaRecord) -> Result<(), TraceError> {
    let format = meta.format.as_deref().unwrap_or_default();
    if format != FORMAT {
        return Err(TraceError::Format(format.to_string()));
    }
    let version = meta.version.as_deref().unwrap_or_default();
    if version.split('.').next() != Some(VERSION) {
        return Err(TraceError::Version {
            found: version.to_string(),
        });
    }
    Ok(())
}

/// Streaming reader. Malformed lines come out as non-fatal errors.
pub struct TraceReader<R> {
    lines: io::Lines<R>,
    line_no: usize,
    last_seq: Option<u64>,
    header: Option<MetaRecord>,
    pending: Option<String>,
    failed: bool,
}

impl<R: BufRead> TraceReader<R> {
    /// Reads up to the first non-blank line and checks the header if one is
    /// present.
    pub fn new(reader: R) -> Result<Self, TraceError> {
        let mut r = TraceReader {
            lines: reader.lines(),
            line_no: 0,
            last_seq: None,
            header: None,
            pending: None,
            failed: false,
        };
        for line in r.lines.by_ref() {
            let line = line?;
            r.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Ok(TraceRecord::Meta(meta)) = serde_json::from_str::<TraceRecord>(&line) {
                if meta.is_header() {
                    check_header(&meta)?;
                    r.header = Some(meta);
                    return Ok(r);
                }
            }
            log::warn!("trace has no header line; assuming version {VERSION}");
            r.pending = Some(line);
            break;
        }
        Ok(r)
    }

    pub fn header(&self) -> Option<&MetaRecord> {
        self.header.as_ref()
    }

    fn parse(&mut self, line: &str) -> Result<TraceRecord, TraceError> {
        let malformed = |message: String| TraceError::Malformed {
            line: self.line_no,
            message,
        };
        let record: TraceRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        validate(&record).map_err(malformed)?;
        if let Some(seq) = record.seq() {
            if self.last_seq.is_some_and(|last| seq <= last) {
                return Err(malformed(format!(
                    "sequence number {seq} does not increase (previous {})",
                    self.last_seq.unwrap_or_default()
                )));
            }
            self.last_seq = Some(seq);
        }
        Ok(record)
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<TraceRecord, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        if let Some(line) = self.pending.take() {
            return Some(self.parse(&line));
        }
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            };
            self.line_no += 1;
            if !line.trim().is_empty() {
                return Some(self.parse(&line));
            }
        }
    }
}

/// Streaming writer; emits the header on creation.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, producer: &str) -> io::Result<Self> {
        write_line(&mut out, &TraceRecord::Meta(MetaRecord::header(producer)))?;
        Ok(TraceWriter { out })
    }

    pub fn write(&mut self, record: &TraceRecord) -> io::Result<()> {
        write_line(&mut self.out, record)
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

fn write_line<W: Write>(out: &mut W, record: &TraceRecord) -> io::Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")
}

/// Serializes records under a header.
pub fn write_trace(records: &[TraceRecord], producer: &str) -> String {
    let mut w = TraceWriter::new(Vec::new(), producer).expect("writing to memory");
    for r in records {
        w.write(r).expect("writing to memory");
    }
    String::from_utf8(w.finish().expect("writing to memory")).expect("JSON is UTF-8")
}

/// Parses a whole trace, separating malformed lines from records.
pub fn read_trace_str(text: &str) -> Result<(Vec<TraceRecord>, Vec<TraceError>), TraceError> {
    let mut records = Vec::new();
    let mut malformed = Vec::new();
    for item in TraceReader::new(text.as_bytes())? {
        match item {
            Ok(r) => records.push(r),
            Err(e) if e.is_fatal() => return Err(e),
            Err(e) => malformed.push(e),
        }
    }
    Ok((records, malformed))
}
