//! Pass/fail records produced by every verification check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One check's outcome, serialized as
/// `{check, params, samples, violations, worst_margin, pass}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub check: String,
    pub params: BTreeMap<String, Value>,
    pub samples: u64,
    pub violations: u64,
    /// Smallest slack observed; negative values are violations.
    pub worst_margin: f64,
    pub pass: bool,
}

impl VerificationRecord {
    pub fn new(check: impl Into<String>) -> Self {
        Self { check: check.into(), params: BTreeMap::new(), samples: 0, violations: 0, worst_margin: 0.0, pass: true }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.set_param(key, value);
        self
    }

    pub fn set_param(&mut self, key: &str, value: impl Into<Value>) {
        let v = value.into();
        // JSON has no representation for non-finite numbers
        let v = match v {
            Value::Null => Value::String("undefined".into()),
            other => other,
        };
        self.params.insert(key.to_string(), v);
    }

    pub fn with_tally(mut self, tally: Tally) -> Self {
        self.samples = tally.samples;
        self.violations = tally.violations;
        self.worst_margin =
            if tally.samples == 0 || !tally.worst_margin.is_finite() { 0.0 } else { tally.worst_margin };
        self.pass = tally.samples > 0 && tally.violations == 0;
        self
    }

    pub fn fail_unless(mut self, ok: bool) -> Self {
        self.pass &= ok;
        self
    }
}

/// Associative accumulator for sampled checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tally {
    pub samples: u64,
    pub violations: u64,
    pub worst_margin: f64,
}

impl Default for Tally {
    fn default() -> Self {
        Self { samples: 0, violations: 0, worst_margin: f64::INFINITY }
    }
}

impl Tally {
    /// Records one sample whose slack is `margin` (violation iff `margin < 0`
    /// or `violated`).
    pub fn observe(&mut self, margin: f64, violated: bool) {
        self.samples += 1;
        if violated || margin < 0.0 || margin.is_nan() {
            self.violations += 1;
        }
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
    }

    /// Like [`Self::observe`], but margins in `[-pad, 0)` are boundary cases
    /// that do not count as violations.
    pub fn observe_padded(&mut self, margin: f64, pad: f64) {
        self.samples += 1;
        if !(margin >= -pad) {
            self.violations += 1;
        }
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
    }

    pub fn merge(self, other: Tally) -> Tally {
        Tally {
            samples: self.samples + other.samples,
            violations: self.violations + other.violations,
            worst_margin: self.worst_margin.min(other.worst_margin),
        }
    }
}
