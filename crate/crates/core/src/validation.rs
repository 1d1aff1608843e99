//! Structured pass/fail records for the consistency checks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{self, VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst measured discrepancy.
    pub measured: f64,
    pub tolerance: f64,
    /// Where the worst discrepancy occurred, if meaningful.
    pub at: Option<f64>,
    pub detail: Option<String>,
    /// Not applicable to the parameter set; counts as passed.
    #[serde(default)]
    pub skipped: bool,
    /// Optional `(t, value)` trace, e.g. z-scores per output time.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<(f64, f64)>,
}

impl Check {
    /// Passes iff `measured <= tolerance` (NaN fails).
    pub fn bound(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: measured <= tolerance,
            measured,
            tolerance,
            at: None,
            detail: None,
            skipped: false,
            series: Vec::new(),
        }
    }

    pub fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            passed: true,
            skipped: true,
            detail: Some(reason.into()),
            ..Self::bound(name, 0.0, 0.0)
        }
    }

    /// Largest `|value|` of a trace checked against `tolerance`.
    pub fn worst_of(name: impl Into<String>, series: Vec<(f64, f64)>, tolerance: f64) -> Self {
        let (at, measured) = series
            .iter()
            .map(|&(t, v)| (t, if v.is_nan() { f64::INFINITY } else { v.abs() }))
            .fold((None, 0.0), |(a, m), (t, v)| if v > m { (Some(t), v) } else { (a, m) });
        Self {
            at,
            series,
            ..Self::bound(name, measured, tolerance)
        }
    }

    pub fn at(mut self, t: f64) -> Self {
        self.at = Some(t);
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }

    pub fn failed(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            passed: false,
            detail: Some(detail.into()),
            ..Self::bound(name, f64::NAN, 0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub version: String,
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn new(suite: impl Into<String>) -> Self {
        Self {
            version: VERSION.to_string(),
            suite: suite.into(),
            passed: true,
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: ValidationReport) {
        for c in other.checks {
            self.push(c);
        }
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        io::write_json(path, self)
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        self.checks
            .iter()
            .map(|c| {
                if c.skipped {
                    return format!("SKIP {}: {}", c.name, c.detail.as_deref().unwrap_or(""));
                }
                format!(
                    "{} {}: measured {:e} (tolerance {:e}){}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.tolerance,
                    c.at.map(|t| format!(" at t = {t}")).unwrap_or_default()
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}
