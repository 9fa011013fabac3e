//! Report envelope and CSV plot tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use rbmo_core::measures::AtomicMeasure;

use crate::config::RunConfig;
use crate::error::CliError;

pub const TOOL: &str = "rbmo-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct MeasureInfo {
    pub spec: String,
    /// SHA-256 of the canonical measure JSON.
    pub hash: String,
    pub atoms: usize,
    pub m: usize,
    pub n: f64,
    pub scale: f64,
}

impl MeasureInfo {
    pub fn new(spec: &str, mu: &AtomicMeasure) -> Self {
        Self {
            spec: spec.to_string(),
            hash: measure_hash(mu),
            atoms: mu.len(),
            m: mu.ambient_dim(),
            n: mu.growth_dim(),
            scale: mu.scale(),
        }
    }
}

pub fn measure_hash(mu: &AtomicMeasure) -> String {
    let digest = Sha256::digest(mu.to_json_string().as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'a str,
    pub config: &'a RunConfig,
    pub measure: MeasureInfo,
    pub result: T,
}

impl<T: Serialize> Report<'_, T> {
    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Validation(format!("report: {e}")))?;
        s.push('\n');
        Ok(s)
    }
}

/// A plot table: header plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: Vec<&'static str>) -> Self {
        Self { name: name.into(), header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Shortest round-trip float formatting, so reruns are byte-identical.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn emit_plot_data(dir: &Path, tables: &[Table]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    for t in tables {
        std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
    }
    Ok(())
}
