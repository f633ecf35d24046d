//! The result-row schema shared by every subcommand and its CSV/JSON encoders.
//!
//! All numbers are rendered with at least 12 significant digits; infinities
//! become the literal `inf`; cells that do not apply to a row stay empty
//! (`null` in JSON).

use std::io::Write;
use std::path::Path;

use crate::CliError;

pub const CSV_HEADER: &str =
    "param_value,scheme,total_throughput,degradation,poa,pos,mean_total,nep_count,status";

/// One output row. `param_value` is the swept value (sweeps only); the game
/// columns are filled for `modified_game` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub param_value: Option<f64>,
    pub scheme: String,
    pub total_throughput: Option<f64>,
    pub degradation: Option<f64>,
    pub poa: Option<f64>,
    pub pos: Option<f64>,
    pub mean_total: Option<f64>,
    pub nep_count: Option<usize>,
    pub status: String,
}

impl ResultRow {
    pub fn new(scheme: impl Into<String>) -> Self {
        Self {
            param_value: None,
            scheme: scheme.into(),
            total_throughput: None,
            degradation: None,
            poa: None,
            pos: None,
            mean_total: None,
            nep_count: None,
            status: "ok".into(),
        }
    }

    pub fn failed(&self) -> bool {
        self.status.starts_with("error")
    }
}

/// 13 significant digits in scientific notation; `inf` for infinities.
pub fn format_number(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.12e}")
    }
}

fn csv_cell(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        // The status cell must not break the column count.
        let status = row.status.replace(',', ";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            csv_cell(row.param_value),
            row.scheme,
            csv_cell(row.total_throughput),
            csv_cell(row.degradation),
            csv_cell(row.poa),
            csv_cell(row.pos),
            csv_cell(row.mean_total),
            row.nep_count.map(|n| n.to_string()).unwrap_or_default(),
            status,
        ));
    }
    out
}

fn json_number(v: Option<f64>) -> serde_json::Value {
    match v {
        None => serde_json::Value::Null,
        Some(x) if x.is_infinite() => {
            serde_json::Value::String(if x > 0.0 { "inf" } else { "-inf" }.into())
        }
        Some(x) => serde_json::json!(x),
    }
}

pub fn to_json(rows: &[ResultRow]) -> String {
    let array: Vec<serde_json::Value> = rows
        .iter()
        .map(|row| {
            serde_json::json!({
                "param_value": json_number(row.param_value),
                "scheme": row.scheme,
                "total_throughput": json_number(row.total_throughput),
                "degradation": json_number(row.degradation),
                "poa": json_number(row.poa),
                "pos": json_number(row.pos),
                "mean_total": json_number(row.mean_total),
                "nep_count": row.nep_count,
                "status": row.status,
            })
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&array).expect("rows serialize");
    text.push('\n');
    text
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Renders the rows and writes them to `out` (stdout when `None`).
pub fn emit(
    rows: &[ResultRow],
    format: OutputFormat,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let text = match format {
        OutputFormat::Csv => to_csv(rows),
        OutputFormat::Json => to_json(rows),
    };
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}"))),
    }
}
