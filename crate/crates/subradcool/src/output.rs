//! CSV and summary emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::RunError;

pub const UNITS: &[&str] = &[
    "# units: frequencies, detunings, rates and Rabi frequencies in γ₀ (single-atom linewidth)",
    "# units: lengths in λ₀ (transition wavelength); times in 1/γ₀; occupations dimensionless",
];

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) if x.is_nan() => "nan".into(),
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(k) => k.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(k: usize) -> Self {
        Cell::Int(k as u64)
    }
}

impl From<u64> for Cell {
    fn from(k: u64) -> Self {
        Cell::Int(k)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        Cell::Num(x.unwrap_or(f64::NAN))
    }
}

/// A table with its leading grid columns marked for `compare`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub grid_columns: usize,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str], grid_columns: usize) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), grid_columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path, experiment: &str) -> Result<(), RunError> {
        let path = dir.join(format!("{}.csv", self.name));
        let file = File::create(&path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        let mut out = BufWriter::new(file);
        let io = |e: std::io::Error| RunError::Io(format!("{}: {e}", path.display()));
        writeln!(out, "# subradcool {} {experiment}", env!("CARGO_PKG_VERSION")).map_err(io)?;
        for line in UNITS {
            writeln!(out, "{line}").map_err(io)?;
        }
        writeln!(out, "# grid columns: {}", self.grid_columns).map_err(io)?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let csv_err = |e: csv::Error| RunError::Io(format!("{}: {e}", path.display()));
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }
}

/// Record written next to the tables; re-ingestible as a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub subradcool_version: String,
    pub experiment: String,
    pub config: RunConfig,
    pub atoms: usize,
    pub tables: Vec<TableInfo>,
    pub results: serde_json::Value,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableInfo {
    pub file: String,
    pub columns: Vec<String>,
    pub grid_columns: usize,
}

impl Summary {
    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| RunError::Io(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(dir: &Path) -> Result<Summary, RunError> {
        let path = dir.join("summary.json");
        let text = std::fs::read_to_string(&path).map_err(|e| RunError::Schema(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| RunError::Schema(format!("{}: {e}", path.display())))
    }
}

/// Reads a table written by [`Table::write`] back as strings.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), RunError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| RunError::Schema(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| RunError::Schema(format!("{}: {e}", path.display()));
    let header = r.headers().map_err(err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(err)?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}
