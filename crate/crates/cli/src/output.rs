//! Report rendering: pretty JSON or a flat CSV table.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::args::{Format, OutputArgs};
use crate::error::CliResult;

/// A flat table for `--format csv`.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    /// Two-column `key,value` table from a JSON object's scalar fields.
    pub fn from_scalars(value: &Value) -> Self {
        let mut t = Table::new(&["key", "value"]);
        if let Value::Object(map) = value {
            for (k, v) in map {
                match v {
                    Value::Number(_) | Value::Bool(_) => t.push(vec![k.clone(), v.to_string()]),
                    Value::String(s) => t.push(vec![k.clone(), s.clone()]),
                    _ => {}
                }
            }
        }
        t
    }
}

pub struct Report {
    pub json: Value,
    pub table: Table,
}

impl Report {
    pub fn new(json: impl Serialize, table: Table) -> CliResult<Self> {
        Ok(Report {
            json: serde_json::to_value(json)?,
            table,
        })
    }

    /// A report whose CSV form is its scalar fields.
    pub fn scalars(json: impl Serialize) -> CliResult<Self> {
        let json = serde_json::to_value(json)?;
        let table = Table::from_scalars(&json);
        Ok(Report { json, table })
    }
}

/// Shortest decimal that round-trips, in exponent form for tiny values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn emit(out: &OutputArgs, report: &Report) -> CliResult<()> {
    let bytes = match out.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report.json)?;
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&report.table.header)?;
            for row in &report.table.rows {
                w.write_record(row)?;
            }
            w.into_inner().map_err(|e| e.into_error())?
        }
    };
    write(out, &bytes)
}

/// Raw bytes to `--output` or standard output.
pub fn write(out: &OutputArgs, bytes: &[u8]) -> CliResult<()> {
    match &out.output {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}
