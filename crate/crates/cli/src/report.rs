//! Report layout and serialization.
//!
//! JSON reports carry the verdict, the witness with its error, the echoed
//! configuration and one table. CSV output is the table alone, preceded by
//! `#` comment lines holding the verdict.

use std::io::Write;
use std::path::Path;

use demarg_core::Result;
use serde::Serialize;

use crate::config::{Format, RunConfig};

/// Named columns of `f64` rows.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    /// `None` when the command runs no test (a bare bound curve).
    pub verdict: Option<bool>,
    pub verdict_line: String,
    pub witness: f64,
    pub sigma: f64,
    pub threshold: f64,
    pub config_echo: RunConfig,
    pub table: Table,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

/// `"<what>: yes (3σ rule)"` or `"<what>: no (3σ rule)"`.
pub fn verdict_line(what: &str, verdict: bool) -> String {
    format!("{what}: {} (3σ rule)", if verdict { "yes" } else { "no" })
}

fn render(report: &Report, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = format!("# demarg {}\n# {}\n", report.command, report.verdict_line);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&report.table.columns)?;
            for row in &report.table.rows {
                w.write_record(row.iter().map(|v| v.to_string()))?;
            }
            let body = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
            s.push_str(&String::from_utf8_lossy(&body));
            s
        }
    })
}

/// Writes to `out`, or to standard output when it is `None`.
pub fn emit_text(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut o = std::io::stdout().lock();
            o.write_all(text.as_bytes())?;
            o.flush()?;
        }
    }
    Ok(())
}

pub fn emit(report: &Report, format: Format, out: Option<&Path>) -> Result<()> {
    emit_text(&render(report, format)?, out)?;
    if out.is_some() {
        eprintln!("{}", report.verdict_line);
    }
    Ok(())
}
