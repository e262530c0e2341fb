//! Experiment reports (JSON) and sweep tables (CSV).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Outcome of one comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Pass,
    Fail,
    /// Recorded only: the bound is vacuous or there is nothing to compare.
    Informational,
}

/// A measured quantity, optionally compared against an upper bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: Option<f64>,
    /// Identifier of the statement the bound or property comes from.
    pub reference: String,
    pub flag: Flag,
}

impl Check {
    /// `measured ≤ bound`; informational when the bound reaches the trivial cap.
    pub fn upper(name: impl Into<String>, measured: f64, bound: f64, reference: impl Into<String>, cap: f64) -> Self {
        let flag = if bound >= cap {
            Flag::Informational
        } else if measured <= bound {
            Flag::Pass
        } else {
            Flag::Fail
        };
        Self {
            name: name.into(),
            measured,
            bound: Some(bound),
            reference: reference.into(),
            flag,
        }
    }

    /// `measured ≥ bound`.
    pub fn lower(name: impl Into<String>, measured: f64, bound: f64, reference: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            measured,
            bound: Some(bound),
            reference: reference.into(),
            flag: if measured >= bound { Flag::Pass } else { Flag::Fail },
        }
    }

    /// A boolean property; `measured` carries the supporting number.
    pub fn holds(name: impl Into<String>, measured: f64, ok: bool, reference: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            measured,
            bound: None,
            reference: reference.into(),
            flag: if ok { Flag::Pass } else { Flag::Fail },
        }
    }

    pub fn info(name: impl Into<String>, measured: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            bound: None,
            reference: String::new(),
            flag: Flag::Informational,
        }
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub n: u32,
    pub d: Option<u32>,
    #[serde(rename = "T")]
    pub steps: Option<usize>,
    pub t: Option<usize>,
    pub family: String,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub bound: Option<f64>,
    pub bound_ref: String,
    pub flag: Flag,
}

/// Everything an experiment emits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub checks: Vec<Check>,
    pub values: serde_json::Value,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub rows: Vec<TableRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub disclaimer: Option<String>,
    pub wall_clock_s: f64,
}

impl ExperimentReport {
    pub fn new(experiment: impl Into<String>, seed: Option<u64>, config: serde_json::Value) -> Self {
        Self {
            experiment: experiment.into(),
            version: crate::VERSION.to_string(),
            seed,
            config,
            checks: Vec::new(),
            values: serde_json::Value::Null,
            rows: Vec::new(),
            disclaimer: None,
            wall_clock_s: 0.0,
        }
    }

    /// No check failed. Informational entries never count.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.flag != Flag::Fail)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.flag == Flag::Fail).collect()
    }

    /// Appends the checks of another report under a name prefix.
    pub fn absorb(&mut self, prefix: &str, other: ExperimentReport) {
        for mut c in other.checks {
            c.name = format!("{prefix}/{}", c.name);
            self.checks.push(c);
        }
        self.rows.extend(other.rows);
    }

    /// JSON without the wall-clock field, for reproducibility comparisons.
    pub fn numeric_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        strip_wall_clock(&mut v);
        Ok(serde_json::to_string(&v)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn strip_wall_clock(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            map.retain(|k, _| !k.starts_with("wall_clock"));
            map.values_mut().for_each(strip_wall_clock);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_wall_clock),
        _ => {}
    }
}

/// Writes rows as RFC-4180 CSV with a header line.
pub fn write_csv(rows: &[TableRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record([
            "n", "d", "T", "t", "family", "metric", "value", "stderr", "bound", "bound_ref", "flag",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
