//! Structured reports and their CSV sidecars.
//!
//! Reports contain no timestamps, timings or absolute paths, so two runs
//! with the same configuration produce identical bytes.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
pub enum Cmp {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One numeric claim with its tolerance and the oracle it was checked
/// against.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub comparison: Cmp,
    pub tolerance: f64,
    pub oracle: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, comparison: Cmp, tolerance: f64, oracle: &str) -> Check {
        let pass = match comparison {
            Cmp::Below => value < tolerance,
            Cmp::AtMost => value <= tolerance,
            Cmp::AtLeast => value >= tolerance,
        };
        Check { name: name.into(), value, comparison, tolerance, oracle: oracle.into(), pass }
    }

    /// A boolean property, reported as 1 (holds) or 0.
    pub fn holds(name: &str, ok: bool, oracle: &str) -> Check {
        Check::new(name, if ok { 1.0 } else { 0.0 }, Cmp::AtLeast, 1.0, oracle)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InputHash {
    pub name: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: Value,
    pub inputs: Vec<InputHash>,
    pub checks: Vec<Check>,
    pub results: Value,
    pub pass: bool,
}

impl Report {
    pub fn new(command: &str, config: Value) -> Report {
        Report {
            tool: "wplab",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config,
            inputs: Vec::new(),
            checks: Vec::new(),
            results: Value::Null,
            pass: true,
        }
    }

    pub fn input(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.push(InputHash { name: name.into(), sha256: sha256_hex(bytes) });
    }

    pub fn check(&mut self, c: Check) {
        self.pass &= c.pass;
        self.checks.push(c);
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s.into_bytes()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Column-oriented plot data.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Table {
        Table { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Path of the sidecar `<stem>.<table>.csv` next to a report.
pub fn sidecar_path(report: &Path, table: &str) -> PathBuf {
    let stem = report.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    report.with_file_name(format!("{stem}.{table}.csv"))
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("report");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Writes the report and its tables; returns the report digest.
pub fn emit(path: &Path, report: &Report, tables: &[Table]) -> std::io::Result<String> {
    for t in tables {
        write_atomic(&sidecar_path(path, &t.name), t.to_csv().as_bytes())?;
    }
    let bytes = report.to_bytes();
    write_atomic(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}
