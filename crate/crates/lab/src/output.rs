//! CSV files under an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{LabError, LabResult};

/// Number formatting used in every CSV: shortest round-trip decimal.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Creates `dir` (and parents) if needed.
pub fn prepare_dir(dir: &Path) -> LabResult<()> {
    fs::create_dir_all(dir).map_err(|source| LabError::Unwritable { path: dir.to_path_buf(), source })
}

/// A header plus rows, written in one go.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| (*h).to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Writes `dir/name` and returns its path.
    pub fn write(&self, dir: &Path, name: &str) -> LabResult<PathBuf> {
        prepare_dir(dir)?;
        let path = dir.join(name);
        let unwritable = |source: std::io::Error| LabError::Unwritable { path: path.clone(), source };
        let mut writer = csv::Writer::from_path(&path).map_err(|e| unwritable(e.into()))?;
        writer.write_record(&self.header).map_err(|e| unwritable(e.into()))?;
        for row in &self.rows {
            writer.write_record(row).map_err(|e| unwritable(e.into()))?;
        }
        writer.flush().map_err(unwritable)?;
        Ok(path)
    }
}

/// `theta0.5`-style file-name fragment.
pub fn tag(name: &str, value: f64) -> String {
    format!("{name}{}", num(value))
}
