//! JSON and CSV rendering of results.
//!
//! Floats are written as `{:.16e}` (17 significant digits, which round-trip
//! exactly). Non-finite values become the strings `inf`, `-inf` and `nan`.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::config::{ConfigValue, RunConfig};
use crate::CliError;
use pbft_markov::measures::Method;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<ConfigValue> for Cell {
    fn from(v: ConfigValue) -> Self {
        match v {
            ConfigValue::Int(i) => Cell::Int(i),
            ConfigValue::Float(f) => Cell::Float(f),
            ConfigValue::Text(s) => Cell::Text(s),
        }
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(v) if v.is_finite() => {
                let n: Number = serde_json::from_str(&format_float(*v)).expect("formatted float is valid JSON");
                Value::Number(n)
            }
            Cell::Float(v) => Value::String(format_float(*v)),
            Cell::Int(v) => Value::Number((*v).into()),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Bool(b) => Value::Bool(*b),
        }
    }
}

/// Named scalars plus an optional table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub scalars: Vec<(String, Cell)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn scalar(&mut self, key: &str, value: impl Into<Cell>) {
        self.scalars.push((key.to_string(), value.into()));
    }

    pub fn has_table(&self) -> bool {
        !self.columns.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

fn header(config: &RunConfig, method: Method) -> Vec<(String, Cell)> {
    let mut out = vec![("version".to_string(), Cell::Text(env!("CARGO_PKG_VERSION").into()))];
    out.extend(
        config
            .entries(method)
            .into_iter()
            .map(|(k, v)| (format!("config_{k}"), Cell::from(v))),
    );
    out
}

/// Flat JSON object: version, resolved config, scalars, then one array per
/// table column.
pub fn render_json(report: &Report, config: &RunConfig, method: Method) -> String {
    let mut map = Map::new();
    for (k, v) in header(config, method).iter().chain(&report.scalars) {
        map.insert(k.clone(), v.json());
    }
    for (c, name) in report.columns.iter().enumerate() {
        let column = report.rows.iter().map(|r| r[c].json()).collect();
        map.insert(name.clone(), Value::Array(column));
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(map)).expect("JSON rendering");
    text.push('\n');
    text
}

/// CSV with `# key = value` comment lines for version and config. A report
/// with a table puts its scalars in trailing comment lines; a report
/// without one becomes a single data row.
pub fn render_csv(report: &Report, config: &RunConfig, method: Method) -> Result<String, CliError> {
    let mut out = String::new();
    for (k, v) in header(config, method) {
        out.push_str(&format!("# {k} = {}\n", v.text()));
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Output(e.to_string());
    if report.has_table() {
        writer.write_record(&report.columns).map_err(csv_err)?;
        for row in &report.rows {
            writer.write_record(row.iter().map(Cell::text)).map_err(csv_err)?;
        }
    } else {
        writer.write_record(report.scalars.iter().map(|(k, _)| k)).map_err(csv_err)?;
        writer.write_record(report.scalars.iter().map(|(_, v)| v.text())).map_err(csv_err)?;
    }
    let body = writer.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    out.push_str(&String::from_utf8(body).expect("CSV is UTF-8"));
    if report.has_table() {
        for (k, v) in &report.scalars {
            out.push_str(&format!("# {k} = {}\n", v.text()));
        }
    }
    Ok(out)
}

pub fn emit(
    report: &Report,
    config: &RunConfig,
    method: Method,
    format: Format,
    destination: Option<&Path>,
) -> Result<(), CliError> {
    let text = match format {
        Format::Json => render_json(report, config, method),
        Format::Csv => render_csv(report, config, method)?,
    };
    match destination {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Output(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e17, 5e-324] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(f64::INFINITY), "inf");
    }

    #[test]
    fn json_number_keeps_digits() {
        let v = Cell::Float(0.1).json();
        assert_eq!(v.to_string(), "1.0000000000000001e-1");
    }
}
