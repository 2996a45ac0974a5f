//! Parsing and synchronization of multivariate numeric streams.
//!
//! Step index t is synthetic (1, 2, 3, ...) regardless of wall-clock time;
//! timestamps are carried as opaque metadata. Non-finite values never make it
//! past ingestion: the running statistics downstream are undefined for them.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::MAX_STREAMS;

/// Ordered stream names plus an optional timestamp column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSchema {
    names: Vec<String>,
    timestamp_column: Option<String>,
}

impl StreamSchema {
    pub fn new(names: Vec<String>) -> Result<Self> {
        Self::with_timestamp(names, None)
    }

    pub fn with_timestamp(names: Vec<String>, timestamp_column: Option<String>) -> Result<Self> {
        if names.is_empty() || names.len() > MAX_STREAMS {
            return Err(Error::Schema(format!(
                "schema must name between 1 and {MAX_STREAMS} streams, got {}",
                names.len()
            )));
        }
        let unique: BTreeSet<&String> = names.iter().collect();
        if unique.len() != names.len() || names.iter().any(|n| n.is_empty()) {
            return Err(Error::Schema(
                "stream names must be unique and non-empty".into(),
            ));
        }
        if let Some(ts) = &timestamp_column {
            if names.contains(ts) {
                return Err(Error::Schema(format!(
                    "timestamp column `{ts}` collides with a stream name"
                )));
            }
        }
        Ok(Self {
            names,
            timestamp_column,
        })
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn timestamp_column(&self) -> Option<&str> {
        self.timestamp_column.as_deref()
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// One synchronized row of n readings at step t.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    pub t: u64,
    pub values: Vec<f64>,
    /// Opaque source timestamp, when the input carried one.
    pub timestamp: Option<String>,
}

impl ContextVector {
    pub fn new(t: u64, values: Vec<f64>) -> Self {
        Self {
            t,
            values,
            timestamp: None,
        }
    }

    pub fn with_timestamp(t: u64, values: Vec<f64>, timestamp: Option<String>) -> Self {
        Self {
            t,
            values,
            timestamp,
        }
    }
}

/// What to do with a malformed record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorPolicy {
    /// Skip the record and count it.
    Skip,
    /// Abort with the offending line number.
    Abort,
}

impl std::str::FromStr for ErrorPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skip" => Ok(ErrorPolicy::Skip),
            "abort" => Ok(ErrorPolicy::Abort),
            other => Err(Error::InvalidParameter(format!(
                "unknown error policy `{other}`"
            ))),
        }
    }
}

/// Input encoding of a context stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamFormat {
    Csv,
    Ndjson,
}

impl std::str::FromStr for StreamFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(StreamFormat::Csv),
            "ndjson" => Ok(StreamFormat::Ndjson),
            other => Err(Error::InvalidParameter(format!(
                "unknown stream format `{other}`"
            ))),
        }
    }
}

/// Parsed context vectors plus the count of records dropped under the skip
/// policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub vectors: Vec<ContextVector>,
    pub skipped: u64,
}

/// Parse a context stream into consecutive step-indexed vectors.
///
/// CSV needs a header row matching the schema names (order-insensitive);
/// columns are normalized to schema order. NDJSON takes one object per line,
/// keys equal to stream names. Rows with non-numeric or non-finite cells are
/// handled per `policy`; a header missing a schema column always aborts.
pub fn parse_context_stream<R: Read>(
    source: R,
    schema: &StreamSchema,
    format: StreamFormat,
    policy: ErrorPolicy,
) -> Result<ParseOutcome> {
    match format {
        StreamFormat::Csv => parse_csv(source, schema, policy),
        StreamFormat::Ndjson => parse_ndjson(source, schema, policy),
    }
}

fn parse_csv<R: Read>(
    source: R,
    schema: &StreamSchema,
    policy: ErrorPolicy,
) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers()?.clone();

    // column position of every schema stream, order-insensitive
    let mut positions = Vec::with_capacity(schema.n());
    for name in schema.names() {
        let pos = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        positions.push(pos);
    }
    let ts_pos = schema
        .timestamp_column()
        .and_then(|ts| headers.iter().position(|h| h == ts));

    let mut vectors = Vec::new();
    let mut skipped = 0u64;
    let mut t = 0u64;
    for (i, row) in reader.records().enumerate() {
        let line = (i + 2) as u64; // header is line 1
        let row = row?;
        match parse_csv_row(&row, &positions, ts_pos, line) {
            Ok((values, timestamp)) => {
                t += 1;
                vectors.push(ContextVector::with_timestamp(t, values, timestamp));
            }
            Err(e) => match policy {
                ErrorPolicy::Abort => return Err(e),
                ErrorPolicy::Skip => skipped += 1,
            },
        }
    }
    Ok(ParseOutcome { vectors, skipped })
}

fn parse_csv_row(
    row: &csv::StringRecord,
    positions: &[usize],
    ts_pos: Option<usize>,
    line: u64,
) -> Result<(Vec<f64>, Option<String>)> {
    let mut values = Vec::with_capacity(positions.len());
    for pos in positions {
        let cell = row.get(*pos).ok_or_else(|| Error::Parse {
            line,
            reason: format!("row too short for column {pos}"),
        })?;
        let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
            line,
            reason: format!("non-numeric cell `{cell}`"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line,
                reason: format!("non-finite value `{cell}`"),
            });
        }
        values.push(v);
    }
    let timestamp = ts_pos.and_then(|p| row.get(p)).map(str::to_string);
    Ok((values, timestamp))
}

fn parse_ndjson<R: Read>(
    source: R,
    schema: &StreamSchema,
    policy: ErrorPolicy,
) -> Result<ParseOutcome> {
    let mut text = String::new();
    let mut src = source;
    src.read_to_string(&mut text)?;

    let mut vectors = Vec::new();
    let mut skipped = 0u64;
    let mut t = 0u64;
    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        if raw.trim().is_empty() {
            continue;
        }
        match parse_ndjson_line(raw, schema, line) {
            Ok((values, timestamp)) => {
                t += 1;
                vectors.push(ContextVector::with_timestamp(t, values, timestamp));
            }
            Err(e) => match policy {
                ErrorPolicy::Abort => return Err(e),
                ErrorPolicy::Skip => skipped += 1,
            },
        }
    }
    Ok(ParseOutcome { vectors, skipped })
}

fn parse_ndjson_line(
    raw: &str,
    schema: &StreamSchema,
    line: u64,
) -> Result<(Vec<f64>, Option<String>)> {
    let obj: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(raw).map_err(|e| Error::Parse {
            line,
            reason: format!("bad json: {e}"),
        })?;
    let mut values = Vec::with_capacity(schema.n());
    for name in schema.names() {
        let v = obj.get(name).ok_or_else(|| Error::Parse {
            line,
            reason: format!("missing key `{name}`"),
        })?;
        let x = v.as_f64().ok_or_else(|| Error::Parse {
            line,
            reason: format!("key `{name}` is not numeric"),
        })?;
        if !x.is_finite() {
            return Err(Error::Parse {
                line,
                reason: format!("key `{name}` is non-finite"),
            });
        }
        values.push(x);
    }
    let timestamp = schema
        .timestamp_column()
        .and_then(|ts| obj.get(ts))
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .unwrap_or_else(|| v.to_string())
        });
    Ok((values, timestamp))
}

/// A partially observed tick: per-stream readings keyed by schema position.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub timestamp: i64,
    pub values: Vec<Option<f64>>,
}

/// Gap handling for asynchronous sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignPolicy {
    /// Emit only timestamps where every stream reported.
    Strict,
    /// Fill gaps with the most recent value per stream; nothing is emitted
    /// until every stream has reported at least once.
    LastValueHold,
}

impl std::str::FromStr for AlignPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(AlignPolicy::Strict),
            "hold" | "last-value-hold" => Ok(AlignPolicy::LastValueHold),
            other => Err(Error::InvalidParameter(format!(
                "unknown align policy `{other}`"
            ))),
        }
    }
}

/// Aligned vectors plus the count of timestamps dropped under strict policy
/// (or withheld before first full coverage under hold).
#[derive(Debug, Clone, PartialEq)]
pub struct AlignOutcome {
    pub vectors: Vec<ContextVector>,
    pub dropped: u64,
}

/// Synchronize partial per-timestamp readings into complete context vectors.
///
/// Records sharing a timestamp are merged into one tick (later values win per
/// stream). Timestamps must be non-decreasing.
pub fn align_streams(records: &[RawRecord], n: usize, policy: AlignPolicy) -> Result<AlignOutcome> {
    for r in records {
        if r.values.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: r.values.len(),
            });
        }
    }
    if records.windows(2).any(|w| w[0].timestamp > w[1].timestamp) {
        return Err(Error::InvalidParameter(
            "timestamps must be non-decreasing".into(),
        ));
    }

    // merge equal timestamps into ticks
    let mut ticks: Vec<(i64, Vec<Option<f64>>)> = Vec::new();
    for r in records {
        match ticks.last_mut() {
            Some((ts, merged)) if *ts == r.timestamp => {
                for (slot, v) in merged.iter_mut().zip(&r.values) {
                    if v.is_some() {
                        *slot = *v;
                    }
                }
            }
            _ => ticks.push((r.timestamp, r.values.clone())),
        }
    }

    let mut vectors = Vec::new();
    let mut dropped = 0u64;
    let mut held: Vec<Option<f64>> = vec![None; n];
    let mut t = 0u64;
    for (ts, tick) in ticks {
        match policy {
            AlignPolicy::Strict => {
                if tick.iter().all(Option::is_some) {
                    t += 1;
                    vectors.push(ContextVector::with_timestamp(
                        t,
                        tick.iter().map(|v| v.unwrap()).collect(),
                        Some(ts.to_string()),
                    ));
                } else {
                    dropped += 1;
                }
            }
            AlignPolicy::LastValueHold => {
                for (slot, v) in held.iter_mut().zip(&tick) {
                    if v.is_some() {
                        *slot = *v;
                    }
                }
                if held.iter().all(Option::is_some) {
                    t += 1;
                    vectors.push(ContextVector::with_timestamp(
                        t,
                        held.iter().map(|v| v.unwrap()).collect(),
                        Some(ts.to_string()),
                    ));
                } else {
                    dropped += 1;
                }
            }
        }
    }
    Ok(AlignOutcome { vectors, dropped })
}

/// Read partial NDJSON records for the alignment path: missing keys become
/// gaps instead of errors. A `timestamp` field groups lines into ticks;
/// without one, each line is its own tick.
pub fn read_partial_ndjson<R: Read>(source: R, schema: &StreamSchema) -> Result<Vec<RawRecord>> {
    let mut text = String::new();
    let mut src = source;
    src.read_to_string(&mut text)?;

    let ts_key = schema.timestamp_column().unwrap_or("timestamp");
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        if raw.trim().is_empty() {
            continue;
        }
        let obj: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(raw).map_err(|e| Error::Parse {
                line,
                reason: format!("bad json: {e}"),
            })?;
        let timestamp = match obj.get(ts_key) {
            Some(v) => v.as_i64().ok_or_else(|| Error::Parse {
                line,
                reason: "timestamp must be an integer".into(),
            })?,
            None => line as i64,
        };
        let mut values = vec![None; schema.n()];
        for (name, v) in &obj {
            if name == ts_key {
                continue;
            }
            if let Some(idx) = schema.index_of(name) {
                let x = v.as_f64().ok_or_else(|| Error::Parse {
                    line,
                    reason: format!("key `{name}` is not numeric"),
                })?;
                if !x.is_finite() {
                    return Err(Error::Parse {
                        line,
                        reason: format!("key `{name}` is non-finite"),
                    });
                }
                values[idx] = Some(x);
            }
        }
        records.push(RawRecord { timestamp, values });
    }
    Ok(records)
}

/// Write context vectors as CSV, schema order, optional timestamp column.
pub fn write_context_csv<W: Write>(
    out: W,
    vectors: &[ContextVector],
    schema: &StreamSchema,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let with_ts = schema.timestamp_column().is_some();
    let mut header: Vec<String> = Vec::new();
    if let Some(ts) = schema.timestamp_column() {
        header.push(ts.to_string());
    }
    header.extend(schema.names().iter().cloned());
    w.write_record(&header)?;
    for cv in vectors {
        if cv.values.len() != schema.n() {
            return Err(Error::LengthMismatch {
                expected: schema.n(),
                found: cv.values.len(),
            });
        }
        let mut rec: Vec<String> = Vec::new();
        if with_ts {
            rec.push(cv.timestamp.clone().unwrap_or_default());
        }
        rec.extend(cv.values.iter().map(|v| format_value(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trippable decimal form.
fn format_value(v: f64) -> String {
    let mut buf = ryu_like(v);
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("nan") {
        buf.push_str(".0");
    }
    buf
}

fn ryu_like(v: f64) -> String {
    // f64 Display in Rust prints the shortest representation that
    // round-trips, which is exactly what the round-trip invariant needs
    format!("{v}")
}

/// Derive a schema from a CSV header: every column except the timestamp one.
pub fn schema_from_csv_header<R: Read>(source: R, timestamp_column: &str) -> Result<StreamSchema> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    let mut names = Vec::new();
    let mut ts = None;
    for h in headers.iter() {
        if h == timestamp_column {
            ts = Some(h.to_string());
        } else {
            names.push(h.to_string());
        }
    }
    StreamSchema::with_timestamp(names, ts)
}

/// Derive a schema from the first NDJSON object: its keys, sorted, minus the
/// timestamp key.
pub fn schema_from_ndjson_first_line<R: Read>(
    source: R,
    timestamp_column: &str,
) -> Result<StreamSchema> {
    let mut text = String::new();
    let mut src = source;
    src.read_to_string(&mut text)?;
    let first = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::Schema("empty ndjson input".into()))?;
    let obj: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(first).map_err(|e| Error::Parse {
            line: 1,
            reason: format!("bad json: {e}"),
        })?;
    let mut names: Vec<String> = obj
        .keys()
        .filter(|k| k.as_str() != timestamp_column)
        .cloned()
        .collect();
    names.sort();
    let ts = obj.keys().find(|k| k.as_str() == timestamp_column).cloned();
    StreamSchema::with_timestamp(names, ts)
}
