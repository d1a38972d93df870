use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::builder::SolverParams;

pub const REPORT_SCHEMA: &str = "isofol-report/1";

/// Outcome of one named check over the sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub anchor: String,
    pub samples: usize,
    /// Largest residual over the samples that evaluated; `None` when none did.
    pub max: Option<f64>,
    pub mean: Option<f64>,
    pub tol: f64,
    pub pass: bool,
    /// Informational checks are reported but do not affect `pass`.
    pub enabled: bool,
    /// Samples whose residual exceeded `tol` or failed to evaluate.
    pub failures: usize,
    /// First evaluation error, if any.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub solver: SolverParams,
    pub first_derivative: String,
    pub nested_derivative: String,
    pub sample_box: String,
    pub tol_overrides: BTreeMap<String, f64>,
    pub crate_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub schema: String,
    pub scenario: String,
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    pub metadata: ReportMetadata,
}

impl ResidualReport {
    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table, one line per check.
    pub fn summary(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = format!("scenario {}  seed {}  samples {}\n", self.scenario, self.seed, self.samples);
        for c in &self.checks {
            let status = match (c.enabled, c.pass) {
                (false, _) => "info",
                (true, true) => "pass",
                (true, false) => "FAIL",
            };
            let max = c.max.map_or("-".to_string(), |v| format!("{v:.3e}"));
            out.push_str(&format!("{status}  {:width$}  max {max:>10}  tol {:.0e}", c.name, c.tol));
            if let Some(e) = &c.error {
                out.push_str(&format!("  ({e})"));
            }
            out.push('\n');
        }
        out.push_str(if self.pass { "overall: pass\n" } else { "overall: FAIL\n" });
        out
    }
}
