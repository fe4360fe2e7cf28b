//! File formats: priors, channels, grouping plans, and output helpers.
//!
//! Priors are CSV with a `label,prob` header or a JSON object
//! `{"label": prob, ...}`; atom order follows the file. Channels are a CSV
//! matrix whose first column holds input labels and whose header holds
//! output labels, or JSON `{"inputs": [..], "outputs": [..], "rows": [[..]]}`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::error::LipError;
use crate::grouping::GroupingPlan;
use crate::mechanism::Channel;
use crate::pmf::{Pmf, Symbol, ZeroPolicy};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Malformed(String),
    #[error(transparent)]
    Content(#[from] LipError),
}

/// Rounds to 12 significant digits, the precision of every emitted number.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Text form of [`sig12`]; infinities print as `inf`.
pub fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{}", sig12(x))
    }
}

/// JSON number with 12 significant digits; non-finite values become `null`.
pub fn json_num(x: f64) -> Value {
    serde_json::Number::from_f64(sig12(x))
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn parse_real(text: &str, what: &str) -> Result<f64, FormatError> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| FormatError::Malformed(format!("{what}: `{text}` is not a number")))
}

fn looks_like_json(text: &str) -> bool {
    text.trim_start().starts_with('{')
}

pub fn parse_pmf(text: &str, zero_policy: ZeroPolicy) -> Result<Pmf, FormatError> {
    if looks_like_json(text) {
        parse_pmf_json(text, zero_policy)
    } else {
        parse_pmf_csv(text, zero_policy)
    }
}

pub fn parse_pmf_csv(text: &str, zero_policy: ZeroPolicy) -> Result<Pmf, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "label" || &headers[1] != "prob" {
        return Err(FormatError::Malformed(
            "prior CSV must have the header `label,prob`".into(),
        ));
    }
    let mut atoms = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 2 {
            return Err(FormatError::Malformed(format!(
                "expected 2 fields, got {}",
                record.len()
            )));
        }
        atoms.push((record[0].to_owned(), parse_real(&record[1], &record[0])?));
    }
    Ok(Pmf::new(atoms, zero_policy)?)
}

pub fn parse_pmf_json(text: &str, zero_policy: ZeroPolicy) -> Result<Pmf, FormatError> {
    let value: Value = serde_json::from_str(text)?;
    let object = value
        .as_object()
        .ok_or_else(|| FormatError::Malformed("prior JSON must be an object".into()))?;
    let atoms = object
        .iter()
        .map(|(label, v)| {
            v.as_f64()
                .map(|p| (label.clone(), p))
                .ok_or_else(|| FormatError::Malformed(format!("`{label}`: not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Pmf::new(atoms, zero_policy)?)
}

pub fn pmf_to_json(pmf: &Pmf) -> Value {
    Value::Object(
        pmf.iter()
            .map(|(s, p)| (s.to_string(), json_num(p)))
            .collect::<Map<_, _>>(),
    )
}

pub fn pmf_to_csv(pmf: &Pmf) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["label", "prob"])
        .expect("in-memory write");
    for (s, p) in pmf.iter() {
        writer
            .write_record([s.as_str(), &fmt_num(p)])
            .expect("in-memory write");
    }
    into_string(writer)
}

pub(crate) fn into_string(writer: csv::Writer<Vec<u8>>) -> String {
    let bytes = writer.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("labels are utf-8")
}

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    inputs: Vec<Symbol>,
    outputs: Vec<Symbol>,
    rows: Vec<Vec<f64>>,
}

pub fn parse_channel(text: &str) -> Result<Channel, FormatError> {
    if looks_like_json(text) {
        parse_channel_json(text)
    } else {
        parse_channel_csv(text)
    }
}

pub fn parse_channel_json(text: &str) -> Result<Channel, FormatError> {
    let raw: ChannelJson = serde_json::from_str(text)?;
    Ok(Channel::new(raw.inputs, raw.outputs, raw.rows)?)
}

pub fn parse_channel_csv(text: &str) -> Result<Channel, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(FormatError::Malformed(
            "channel CSV needs an input column and at least one output column".into(),
        ));
    }
    let outputs = headers
        .iter()
        .skip(1)
        .map(Symbol::new)
        .collect::<Result<Vec<_>, _>>()?;
    let mut inputs = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let label = record.get(0).unwrap_or_default().to_owned();
        let row = record
            .iter()
            .skip(1)
            .map(|v| parse_real(v, &label))
            .collect::<Result<Vec<_>, _>>()?;
        inputs.push(Symbol::new(label)?);
        rows.push(row);
    }
    Ok(Channel::new(inputs, outputs, rows)?)
}

pub fn channel_to_csv(channel: &Channel) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once("input").chain(channel.outputs().iter().map(Symbol::as_str));
    writer.write_record(header).expect("in-memory write");
    for (x, row) in channel.inputs().iter().zip(channel.rows()) {
        let fields = std::iter::once(x.to_string()).chain(row.iter().map(|&q| fmt_num(q)));
        writer.write_record(fields).expect("in-memory write");
    }
    into_string(writer)
}

pub fn channel_to_json(channel: &Channel) -> Value {
    let rows = channel
        .rows()
        .map(|row| Value::Array(row.iter().map(|&q| json_num(q)).collect()))
        .collect();
    serde_json::json!({
        "inputs": channel.inputs(),
        "outputs": channel.outputs(),
        "rows": Value::Array(rows),
    })
}

/// `{ell, members, grouped_label, reduced}` for a grouping plan.
pub fn plan_to_json(plan: &GroupingPlan) -> Value {
    serde_json::json!({
        "ell": plan.ell(),
        "members": plan.members(),
        "grouped_label": plan.grouped_symbol(),
        "reduced": pmf_to_json(plan.reduced()),
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json_text(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("values serialize");
    text.push('\n');
    text
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// renamed into place only once fully written.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
