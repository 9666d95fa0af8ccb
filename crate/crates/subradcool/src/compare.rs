//! Point-by-point comparison of two run directories.

use std::path::Path;

use crate::output::{read_table, Summary};
use crate::RunError;

#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub table: String,
    pub grid: Vec<String>,
    pub column: String,
    pub a: f64,
    pub b: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<Deviation>,
    pub max: f64,
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish or are both NaN.
fn relative(a: f64, b: f64) -> f64 {
    if a.is_nan() && b.is_nan() {
        return 0.0;
    }
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compares every table the two runs share on their common numeric value
/// columns. The grids (atom count and grid columns) must match exactly.
pub fn compare(dir_a: &Path, dir_b: &Path) -> Result<Report, RunError> {
    let (sa, sb) = (Summary::read(dir_a)?, Summary::read(dir_b)?);
    if sa.atoms != sb.atoms {
        return Err(RunError::GridMismatch(format!("{} atoms vs {}", sa.atoms, sb.atoms)));
    }
    let mut rows = Vec::new();
    let mut shared = 0;
    for ta in &sa.tables {
        let Some(tb) = sb.tables.iter().find(|t| t.file == ta.file) else { continue };
        shared += 1;
        let (ha, ra) = read_table(&dir_a.join(&ta.file))?;
        let (hb, rb) = read_table(&dir_b.join(&tb.file))?;
        let g = ta.grid_columns;
        if tb.grid_columns != g || ha[..g] != hb[..g] || ra.len() != rb.len() {
            return Err(RunError::GridMismatch(format!("{}: grid columns or lengths differ", ta.file)));
        }
        for (x, y) in ra.iter().zip(&rb) {
            if x[..g] != y[..g] {
                return Err(RunError::GridMismatch(format!("{}: grid point {:?} vs {:?}", ta.file, &x[..g], &y[..g])));
            }
        }
        for (ca, name) in ha.iter().enumerate().skip(g) {
            let Some(cb) = hb.iter().position(|h| h == name) else { continue };
            for (x, y) in ra.iter().zip(&rb) {
                let (Ok(a), Ok(b)) = (x[ca].parse::<f64>(), y[cb].parse::<f64>()) else { continue };
                rows.push(Deviation { table: ta.file.clone(), grid: x[..g].to_vec(), column: name.clone(), a, b, relative: relative(a, b) });
            }
        }
    }
    if shared == 0 {
        return Err(RunError::GridMismatch("the runs share no tables".into()));
    }
    let max = rows.iter().map(|r| r.relative).fold(0.0, f64::max);
    Ok(Report { rows, max })
}

impl Report {
    pub fn render(&self) -> String {
        let mut out = String::from("table,grid,column,a,b,relative_deviation\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{:.16e},{:.16e},{:.16e}\n", r.table, r.grid.join(";"), r.column, r.a, r.b, r.relative));
        }
        out.push_str(&format!("# max relative deviation: {:.16e}\n", self.max));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::relative;

    #[test]
    fn relative_deviation_edge_cases() {
        assert_eq!(relative(0.0, 0.0), 0.0);
        assert_eq!(relative(f64::NAN, f64::NAN), 0.0);
        assert!(relative(f64::NAN, 1.0).is_nan());
        assert_eq!(relative(1.0, -1.0), 2.0);
        assert!((relative(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert_eq!(relative(2.0, 3.0), relative(3.0, 2.0));
    }
}
