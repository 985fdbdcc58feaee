//! The assembled report written as `report.json`.

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::gibbs::TableEntry;
use crate::hyperbolic::HyperbolicConstants;
use crate::potential::Potential;
use crate::record::VerificationRecord;

/// One record as it appears in the report, tagged with the statement it
/// tests and the potential it ran under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub anchor: String,
    pub potential: Option<String>,
    #[serde(flatten)]
    pub record: VerificationRecord,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PotentialDiagnostics {
    pub potential: String,
    pub spec: Option<Potential>,
    #[serde(rename = "P")]
    pub pressure: Option<f64>,
    #[serde(rename = "K_table")]
    pub k_table: Vec<TableEntry>,
    #[serde(rename = "L_table")]
    pub l_table: Vec<TableEntry>,
    #[serde(rename = "K0_half")]
    pub k0_half: Option<f64>,
    #[serde(rename = "K0")]
    pub k0_full: Option<f64>,
    #[serde(rename = "K1")]
    pub k1: Option<f64>,
    #[serde(rename = "Kbar_emp")]
    pub kbar_emp: Option<f64>,
    #[serde(rename = "Kbar_formula")]
    pub kbar_formula: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub command: String,
    pub config: RunConfig,
    pub constants: Option<HyperbolicConstants>,
    pub checks: Vec<CheckEntry>,
    pub diagnostics: Vec<PotentialDiagnostics>,
    /// Checks that could not run, with the reason.
    pub errors: Vec<String>,
    /// Files written next to the report.
    pub files: Vec<String>,
    pub pass: bool,
}

impl VerificationReport {
    /// Overall pass iff there is at least one check, every check passed and
    /// nothing errored.
    pub fn overall_pass(&self) -> bool {
        !self.checks.is_empty() && self.errors.is_empty() && self.checks.iter().all(|c| c.record.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
