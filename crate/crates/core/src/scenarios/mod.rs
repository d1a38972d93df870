//! Scenario catalog, scenario files, residual reports and leaf export.

mod catalog;
mod file;
mod leaves;
mod report;
mod run;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analyzer::SubmersionSpec;
use crate::builder::{HoloFoliationSpec, SolverParams};
use crate::linalg::{BoxDomain, RVec};

pub use catalog::{builtin, builtin_names, list_scenarios, CatalogEntry, Overrides, CATALOG};
pub use file::{load_scenario, parse_scenario, BoxSpec, ScenarioFile};
pub use leaves::{emit_leaves, write_leaves_csv, LeafRecord};
pub use report::{CheckRecord, ReportMetadata, ResidualReport, REPORT_SCHEMA};
pub use run::{check_catalog, run, CheckDef, RunOptions};

pub type ChartMap = Arc<dyn Fn(&RVec) -> RVec + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Builder,
    Submersion,
    Both,
}

/// A fully resolved scenario.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub anchor: String,
    pub kind: ScenarioKind,
    pub m: usize,
    pub n: usize,
    /// Chart of the leaf space, in real `(re, im)` coordinates.
    pub chart: BoxDomain,
    pub u: BoxDomain,
    pub solver: SolverParams,
    pub builder: Option<HoloFoliationSpec>,
    pub submersion: Option<SubmersionSpec>,
    /// `φ` in closed form, when known.
    pub closed_form_phi: Option<ChartMap>,
    /// Every leaf passes through the origin.
    pub zero_section: bool,
    /// Checks this scenario is built to fail.
    pub designated_failures: Vec<String>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("m", &self.m)
            .field("n", &self.n)
            .field("chart", &self.chart)
            .field("u", &self.u)
            .finish_non_exhaustive()
    }
}

impl Scenario {
    pub fn is_negative_control(&self) -> bool {
        !self.designated_failures.is_empty()
    }
}
