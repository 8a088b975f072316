use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::{Error, Result};

/// One entry of a sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // Shortest round-trip digits; scientific outside [1e-4, 1e15).
            Cell::Num(v) if *v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&v.abs()) => write!(f, "{v}"),
            Cell::Num(v) => write!(f, "{v:e}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Num(v as f64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Num(v as f64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Grid axes followed by metrics, one row per grid cell.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl SweepTable {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of `column` over rows whose `table` column equals `table`.
    pub fn values(&self, table: &str, column: &str) -> Vec<f64> {
        let (Some(t), Some(c)) = (self.column("table"), self.column(column)) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter(|r| matches!(&r[t], Cell::Text(s) if s == table))
            .filter_map(|r| match r[c] {
                Cell::Num(v) => Some(v),
                Cell::Text(_) => None,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
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

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub config: ExperimentConfig,
    /// Mean mini-batch loss per step of the representative training run.
    pub trace: Vec<f64>,
    pub metrics: BTreeMap<String, f64>,
    pub sweep: SweepTable,
    pub checks: Vec<Check>,
    pub wall_clock_secs: f64,
}

impl RunRecord {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            trace: Vec::new(),
            metrics: BTreeMap::new(),
            sweep: SweepTable::default(),
            checks: Vec::new(),
            wall_clock_secs: 0.0,
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Metrics are finite and fractions lie in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        for (k, v) in &self.metrics {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("metric `{k}` is not finite ({v})")));
            }
            if k.contains("fraction") && !(0.0..=1.0).contains(v) {
                return Err(Error::InvalidConfig(format!("metric `{k}` = {v} is outside [0, 1]")));
            }
        }
        if self.trace.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trace"));
        }
        Ok(())
    }

    /// Same content apart from wall-clock time.
    pub fn same_results(&self, other: &RunRecord) -> bool {
        self.version == other.version
            && self.config == other.config
            && self.trace == other.trace
            && self.metrics == other.metrics
            && self.sweep == other.sweep
            && self.checks == other.checks
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (i, l) in self.trace.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, l));
        }
        out
    }

    /// Writes `run.json`, `trace.csv` and `sweep.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut f = fs::File::create(dir.join("run.json"))?;
        f.write_all(serde_json::to_string_pretty(self)?.as_bytes())?;
        f.write_all(b"\n")?;
        fs::write(dir.join("trace.csv"), self.trace_csv())?;
        fs::write(dir.join("sweep.csv"), self.sweep.to_csv())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
