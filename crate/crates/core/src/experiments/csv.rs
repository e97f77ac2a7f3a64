//! Minimal deterministic CSV output.
//!
//! Numbers carry nine significant digits in fixed decimal notation; values
//! outside `[1e-12, 1e15)` in magnitude fall back to scientific notation.
//! Lines end with LF.

use crate::error::Result;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Nine significant digits; `1/3` becomes `0.333333333`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000000".into();
    }
    let mag = x.abs();
    if !(1e-12..1e15).contains(&mag) {
        return format!("{x:.8e}");
    }
    let exponent = mag.log10().floor() as i32;
    let decimals = (8 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

fn format_cell(cell: &Cell, out: &mut String) {
    match cell {
        Cell::Num(x) => out.push_str(&format_number(*x)),
        Cell::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Cell::Text(s) => {
            if s.contains([',', '"', '\n', '\r']) {
                out.push('"');
                out.push_str(&s.replace('"', "\"\""));
                out.push('"');
            } else {
                out.push_str(s);
            }
        }
        Cell::Empty => {}
    }
}

/// Renders a header and rows to CSV text.
pub fn render_csv(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            format_cell(cell, &mut out);
        }
        out.push('\n');
    }
    out
}

/// Writes a CSV file; each row must have one cell per header column.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    debug_assert!(rows.iter().all(|r| r.len() == header.len()));
    let mut file = std::fs::File::create(path)?;
    file.write_all(render_csv(header, rows).as_bytes())?;
    Ok(())
}

/// Builds rows column-wise from equally long numeric series.
pub fn numeric_rows(columns: &[&[f64]]) -> Vec<Vec<Cell>> {
    let n = columns.first().map_or(0, |c| c.len());
    (0..n)
        .map(|k| columns.iter().map(|c| Cell::Num(c[k])).collect())
        .collect()
}
