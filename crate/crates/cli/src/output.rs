//! CSV files and console tables.
//!
//! CSV numbers are always written with 17 significant digits so they parse
//! back to the same `f64`. The console uses short numbers unless
//! `--machine` is given, in which case it prints the same CSV rows.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// Round-trip exact scientific notation.
pub fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn short(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4e}")
    } else {
        v.to_string()
    }
}

/// Creates `dir` (and parents) if needed.
pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir.to_path_buf())
}

/// A table kept in memory, written as CSV and optionally echoed.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone)]
pub enum Cell {
    Text(String),
    Int(u64),
    Num(f64),
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl Cell {
    fn exact(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => sci(*v),
        }
    }

    fn display(&self) -> String {
        match self {
            Cell::Num(v) => short(*v),
            other => other.exact(),
        }
    }
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))?;
        w.write_record(&self.header).map_err(|e| CliError::csv(path, e))?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::exact))
                .map_err(|e| CliError::csv(path, e))?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }

    /// CSV text with exact numbers.
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::exact)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Aligned columns with short numbers.
    pub fn to_pretty(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Cell::display).collect())
            .collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                cells
                    .iter()
                    .map(|r| r[c].chars().count())
                    .chain([self.header[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |row: &[String]| {
            row.iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (s, w))| if i == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = line(&self.header);
        out.push('\n');
        for r in &cells {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub fn render(&self, machine: bool) -> String {
        if machine {
            self.to_csv_string()
        } else {
            self.to_pretty()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_round_trips() {
        for v in [0.1, 1.0 / 3.0, 8.35e10, -5.4e-4, f64::MIN_POSITIVE, 0.0, 1e-320] {
            assert_eq!(sci(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(sci(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_uses_exact_numbers_and_pretty_short_ones() {
        let mut t = Table::new(["name", "n", "value"]);
        t.push(vec!["a".into(), 3usize.into(), (1.0 / 3.0).into()]);
        let csv = t.to_csv_string();
        assert_eq!(csv, "name,n,value\na,3,3.3333333333333331e-1\n");
        assert!(t.to_pretty().contains("3.3333e-1"));
        assert_eq!(t.render(true), csv);
    }

    #[test]
    fn written_csv_parses_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(["x"]);
        t.push(vec![0.1f64.into()]);
        t.write_csv(&path).unwrap();
        let mut r = csv::Reader::from_path(&path).unwrap();
        let rec = r.records().next().unwrap().unwrap();
        assert_eq!(rec[0].parse::<f64>().unwrap(), 0.1);
    }
}
