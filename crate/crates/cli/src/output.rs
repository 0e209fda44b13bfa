//! Tables, records and atomic file output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// A rectangular result with a fixed header, written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Validation(format!("csv encoding failed: {e}"));
        w.write_record(&self.header).map_err(fail)?;
        for row in &self.rows {
            // Debug for f64 is the shortest string that parses back exactly,
            // switching to exponent form at extreme magnitudes
            w.write_record(row.iter().map(|c| match c {
                Cell::Int(v) => v.to_string(),
                Cell::Float(v) => format!("{v:?}"),
                Cell::Text(s) => s.clone(),
            }))
            .map_err(fail)?;
        }
        w.into_inner().map_err(|e| CliError::Validation(format!("csv encoding failed: {e}")))
    }
}

/// Named pass/fail flag attached to a record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, detail: detail.into() }
    }
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub seed: u64,
    /// Left out of files so that identical runs write identical bytes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    pub results: Value,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub table: Option<Table>,
}

impl RunRecord {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Result<Vec<u8>, CliError> {
        let mut bytes =
            serde_json::to_vec_pretty(self).map_err(|e| CliError::Validation(format!("json encoding failed: {e}")))?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn without_timing(&self) -> Self {
        Self { wall_time_s: None, ..self.clone() }
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let fail = |source| CliError::Output { path: path.display().to_string(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_floats_round_trip() {
        let mut t = Table::new(vec!["n", "x"]);
        let x = 0.1 + 0.2;
        t.push(vec![3usize.into(), x.into()]);
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "n,x\n3,0.30000000000000004\n");
        assert_eq!(text.lines().nth(1).unwrap()[2..].parse::<f64>().unwrap(), x);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/b.txt"), b"x").is_err());
    }
}
