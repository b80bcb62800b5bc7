//! Record tables on disk.
//!
//! Every table is a list of `(label, value)` records in the order the
//! producer gave them. Values are written as `{:.16e}`, 17 significant
//! digits, which round-trips every finite `f64` exactly.
//!
//! * `csv`: header `label,value`, one record per row.
//! * `json-lines`: one `{"label":"…","value":…}` object per line.

use std::io::{BufRead, BufReader, Read, Write};

use serde::Deserialize;

use crate::CliError;

pub type Records = Vec<(String, f64)>;

pub trait Emitter: Send + Sync {
    fn name(&self) -> &'static str;
    fn extension(&self) -> &'static str;
    fn write(&self, records: &[(String, f64)], out: &mut dyn Write) -> Result<(), CliError>;
    fn read(&self, input: &mut dyn Read) -> Result<Records, CliError>;
}

pub struct Csv;
pub struct JsonLines;

static EMITTERS: [&dyn Emitter; 2] = [&Csv, &JsonLines];

/// The emitter registered under `name`.
pub fn emitter(name: &str) -> Option<&'static dyn Emitter> {
    EMITTERS.iter().copied().find(|e| e.name() == name)
}

pub fn emitter_names() -> impl Iterator<Item = &'static str> {
    EMITTERS.iter().map(|e| e.name())
}

fn number(v: f64) -> Result<String, CliError> {
    if !v.is_finite() {
        return Err(CliError::Output(format!("non-finite value {v}")));
    }
    Ok(format!("{v:.16e}"))
}

impl Emitter for Csv {
    fn name(&self) -> &'static str {
        "csv"
    }
    fn extension(&self) -> &'static str {
        "csv"
    }
    fn write(&self, records: &[(String, f64)], out: &mut dyn Write) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let err = |e: csv::Error| CliError::Output(e.to_string());
        w.write_record(["label", "value"]).map_err(err)?;
        for (label, v) in records {
            w.write_record([label.as_str(), number(*v)?.as_str()]).map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
    fn read(&self, input: &mut dyn Read) -> Result<Records, CliError> {
        let mut rd = csv::Reader::from_reader(input);
        let headers = rd.headers().map_err(|e| CliError::Output(e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["label", "value"] {
            return Err(CliError::Output(format!("unexpected csv header {headers:?}")));
        }
        let mut out = Vec::new();
        for row in rd.records() {
            let row = row.map_err(|e| CliError::Output(e.to_string()))?;
            if row.len() != 2 {
                return Err(CliError::Output(format!("csv row has {} fields", row.len())));
            }
            let v: f64 = row[1].parse().map_err(|_| CliError::Output(format!("bad value '{}'", &row[1])))?;
            out.push((row[0].to_string(), v));
        }
        Ok(out)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    label: String,
    value: f64,
}

impl Emitter for JsonLines {
    fn name(&self) -> &'static str {
        "json-lines"
    }
    fn extension(&self) -> &'static str {
        "jsonl"
    }
    fn write(&self, records: &[(String, f64)], out: &mut dyn Write) -> Result<(), CliError> {
        for (label, v) in records {
            let label = serde_json::to_string(label).map_err(|e| CliError::Output(e.to_string()))?;
            writeln!(out, "{{\"label\":{label},\"value\":{}}}", number(*v)?)?;
        }
        Ok(())
    }
    fn read(&self, input: &mut dyn Read) -> Result<Records, CliError> {
        let mut out = Vec::new();
        for (n, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Line =
                serde_json::from_str(&line).map_err(|e| CliError::Output(format!("line {}: {e}", n + 1)))?;
            out.push((rec.label, rec.value));
        }
        Ok(out)
    }
}
