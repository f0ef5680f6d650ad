//! Consolidated metric table in the layout of the paper's comparison table.

use std::io::Write;

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;

pub const COLUMNS: [&str; 12] = [
    "TR", "AR", "Sharpe", "MD", "SR", "Beta", "Alpha", "IR", "CR", "WR", "PLR", "Volatility",
];

/// How each column is printed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Style {
    Percent,
    /// Multiplied by 100 without a sign, as alpha is shown in the source table.
    Scaled,
    Plain,
}

const STYLES: [Style; 12] = [
    Style::Percent,
    Style::Percent,
    Style::Plain,
    Style::Percent,
    Style::Plain,
    Style::Plain,
    Style::Scaled,
    Style::Plain,
    Style::Plain,
    Style::Percent,
    Style::Plain,
    Style::Percent,
];

pub const MISSING: &str = "-";

fn two_decimals(x: f64) -> String {
    let s = format!("{x:.2}");
    // avoid "-0.00"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

pub fn format_cell(value: Option<f64>, column: usize) -> String {
    match value {
        None => MISSING.to_string(),
        Some(v) if !v.is_finite() => MISSING.to_string(),
        Some(v) => match STYLES[column] {
            Style::Percent => format!("{}%", two_decimals(v * 100.0)),
            Style::Scaled => two_decimals(v * 100.0),
            Style::Plain => two_decimals(v),
        },
    }
}

/// One formatted row: strategy name and twelve cells.
pub fn format_row(name: &str, report: &MetricsReport) -> Vec<String> {
    let mut row = vec![name.to_string()];
    row.extend(report.values().iter().enumerate().map(|(i, v)| format_cell(*v, i)));
    row
}

pub fn write_csv<W: Write>(rows: &[Vec<String>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["Strategy"];
    header.extend(COLUMNS);
    w.write_record(&header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io("<metrics csv>", e))?;
    Ok(())
}

/// Fixed-width text rendering for the terminal.
pub fn render_text(rows: &[Vec<String>]) -> String {
    let mut header = vec!["Strategy".to_string()];
    header.extend(COLUMNS.iter().map(|c| c.to_string()));
    let all: Vec<&Vec<String>> = std::iter::once(&header).chain(rows).collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|j| all.iter().map(|r| r.get(j).map_or(0, String::len)).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in all {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if j == 0 {
                    format!("{c:<w$}", w = widths[j])
                } else {
                    format!("{c:>w$}", w = widths[j])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
