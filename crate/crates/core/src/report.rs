//! Result emission: CSV series plus a machine-readable run summary.
//!
//! Output is deterministic byte-for-byte: fixed column order, `\n` line
//! endings, and floats printed in scientific notation with 10 significant
//! digits so reruns of the same configuration diff clean.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::seed::SEED_DERIVATION;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to serialize summary: {0}")]
    Serialize(#[from] serde_json::Error),
    #[error("row has {got} cells but the table has {expected} columns")]
    RowShape { got: usize, expected: usize },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.to_path_buf(), source }
}

/// One CSV cell. Floats render as `{:.9e}`; integers and text verbatim.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.9e}"),
            Cell::Text(v) => v.clone(),
        }
    }
}

/// A rectangular table with a named header row.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<(), ReportError> {
        if row.len() != self.columns.len() {
            return Err(ReportError::RowShape { got: row.len(), expected: self.columns.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    /// Renders the table as CSV text (header first, `\n` endings).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Writes a table to `path`, creating parent directories as needed.
pub fn emit_csv(table: &Table, path: &Path) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(path))?;
    }
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    file.write_all(table.to_csv().as_bytes()).map_err(io_err(path))?;
    Ok(())
}

/// Machine-readable run summary written next to the CSV series.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub kind: String,
    pub master_seed: u64,
    pub jobs: usize,
    pub seed_derivation: &'static str,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub metrics: serde_json::Value,
}

impl RunSummary {
    pub fn new(
        config: &ExperimentConfig,
        master_seed: u64,
        jobs: usize,
        metrics: serde_json::Value,
    ) -> Self {
        Self {
            kind: config.kind.to_string(),
            master_seed,
            jobs,
            seed_derivation: SEED_DERIVATION,
            version: env!("CARGO_PKG_VERSION"),
            config: config.resolved(),
            metrics,
        }
    }
}

/// Writes `summary.json` into `out_dir` and returns its path.
pub fn emit_summary(summary: &RunSummary, out_dir: &Path) -> Result<PathBuf, ReportError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let path = out_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}
