use std::io::Write;

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};
use tmtrace_core::Real;

/// Output of a subcommand: a JSON body, a flat table for CSV, and any flagged
/// assertions.
pub struct Report {
    pub command: &'static str,
    pub config: Map<String, Value>,
    pub json: Value,
    pub table: Table,
    pub flags: Vec<String>,
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub fn num(x: &Real) -> Value {
    Value::String(x.to_decimal_string())
}

pub fn opt_num(x: Option<&Real>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

pub fn text(x: &Real) -> String {
    x.to_decimal_string()
}

pub fn opt_text(x: Option<&Real>) -> String {
    x.map(text).unwrap_or_default()
}

/// A real with the precision it was computed at.
pub fn precise(x: &Real) -> Value {
    json!({ "decimal": x.to_decimal_string(), "precision_bits": x.precision() })
}

pub fn emit(report: &Report, format: Format, out: &mut impl Write) -> Result<()> {
    match format {
        Format::Json => {
            let status = if report.flags.is_empty() { "ok" } else { "flagged" };
            let body = json!({
                "command": report.command,
                "config": Value::Object(report.config.clone()),
                "flags": report.flags,
                "result": report.json,
                "status": status,
            });
            // serde_json's default map is ordered, so keys come out sorted.
            let s = serde_json::to_string_pretty(&body).context("serializing report")?;
            writeln!(out, "{s}").context("writing report")?;
        }
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
            w.write_record(&report.table.header).context("writing CSV header")?;
            for row in &report.table.rows {
                w.write_record(row).context("writing CSV row")?;
            }
            w.flush().context("writing CSV")?;
        }
    }
    Ok(())
}
