//! Run reports and their JSON / CSV artifacts.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateStatus {
    Pass,
    Fail,
    /// Not evaluated, e.g. path integrals after a failed certificate.
    Skipped,
}

impl GateStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub name: String,
    pub status: GateStatus,
    /// Worst observed statistic, in the unit of the tolerance.
    pub value: Option<f64>,
    pub tolerance: f64,
    pub detail: String,
}

impl GateOutcome {
    pub fn check(name: &str, value: f64, tolerance: f64, pass: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            status: if pass {
                GateStatus::Pass
            } else {
                GateStatus::Fail
            },
            value: Some(value),
            tolerance,
            detail,
        }
    }

    pub fn skipped(name: &str, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            status: GateStatus::Skipped,
            value: None,
            tolerance,
            detail,
        }
    }

    pub fn failed(&self) -> bool {
        self.status == GateStatus::Fail
    }

    /// One-line summary printed by `run`.
    pub fn summary_line(&self) -> String {
        let value = self.value.map_or_else(|| "-".to_string(), fmt_num);
        format!(
            "{:<7} {:<24} value {} tolerance {}  {}",
            self.status.as_str().to_uppercase(),
            self.name,
            value,
            fmt_num(self.tolerance),
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub estimates: serde_json::Value,
    pub gates: Vec<GateOutcome>,
    pub seed: u64,
    pub input_hash: String,
    pub wallclock_s: f64,
    pub timestamp: String,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        !self.gates.iter().any(GateOutcome::failed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// SHA-256 of the compact JSON form of the resolved config.
pub fn input_hash(cfg: &ScenarioConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
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

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

/// A plot-ready CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(file: &'static str, header: &[&'static str]) -> Self {
        Self {
            file,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::Num(v) => fmt_num(*v),
                Cell::Text(s) => s.clone(),
                Cell::Empty => String::new(),
            }))
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Decimal with 12 significant digits; scientific notation far from 1.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan"
        } else if v > 0.0 {
            "inf"
        } else {
            "-inf"
        }
        .to_string();
    }
    let sci = format!("{v:.11e}");
    let a = v.abs();
    if (1e-6..1e15).contains(&a) {
        let rounded: f64 = sci.parse().expect("formatted float parses");
        format!("{rounded}")
    } else {
        sci
    }
}

pub fn gates_table(gates: &[GateOutcome]) -> Table {
    let mut t = Table::new(
        "gates.csv",
        &["name", "status", "value", "tolerance", "detail"],
    );
    for g in gates {
        t.push(vec![
            g.name.as_str().into(),
            g.status.as_str().into(),
            g.value.into(),
            g.tolerance.into(),
            g.detail.as_str().into(),
        ]);
    }
    t
}

#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {source}")]
pub struct WriteError {
    pub path: PathBuf,
    pub source: io::Error,
}

/// Writes `report.json` and every table into `dir`.
pub fn write_artifacts(
    dir: &Path,
    report: &RunReport,
    tables: &[Table],
) -> Result<Vec<PathBuf>, WriteError> {
    let wrap = |path: &Path| {
        let path = path.to_path_buf();
        move |source| WriteError { path, source }
    };
    fs::create_dir_all(dir).map_err(wrap(dir))?;
    let mut written = Vec::new();
    let p = dir.join("report.json");
    fs::write(&p, report.to_json()).map_err(wrap(&p))?;
    written.push(p);
    for t in tables {
        let p = dir.join(t.file);
        fs::write(&p, t.to_csv()).map_err(wrap(&p))?;
        written.push(p);
    }
    Ok(written)
}
