//! Structured outcome of one identity check.
//!
//! A report is canonical: its JSON form depends only on the inputs, never on
//! timing, and it never contains a non-finite number. Wall time travels in a
//! separate field that canonical serialization skips.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

/// A complex value as it appears in reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<f64> for ComplexValue {
    fn from(x: f64) -> Self {
        Self { re: x, im: 0.0 }
    }
}

/// One named sub-check inside a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubCheck {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Short identity name, e.g. `voronoi`.
    pub identity: String,
    /// Descriptive anchor of the identity being checked, e.g.
    /// `voronoi.additive-twist.prime-level`.
    pub anchor: String,
    pub inputs: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs: Option<ComplexValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs: Option<ComplexValue>,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub tolerance: f64,
    pub truncation: BTreeMap<String, Value>,
    pub checks: Vec<SubCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
    pub passed: bool,
    #[serde(skip)]
    pub wall_time: f64,
}

fn finite_or(x: f64, fallback: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        fallback
    }
}

impl VerificationReport {
    pub fn new(identity: &str, anchor: &str, tolerance: f64) -> Self {
        Self {
            identity: identity.to_string(),
            anchor: anchor.to_string(),
            inputs: BTreeMap::new(),
            lhs: None,
            rhs: None,
            abs_residual: 0.0,
            rel_residual: 0.0,
            tolerance,
            truncation: BTreeMap::new(),
            checks: Vec::new(),
            first_failure: None,
            passed: true,
            wall_time: 0.0,
        }
    }

    pub fn input(mut self, key: &str, value: impl Serialize) -> Self {
        self.inputs.insert(key.to_string(), to_value(value));
        self
    }

    pub fn set_truncation(&mut self, key: &str, value: impl Serialize) {
        self.truncation.insert(key.to_string(), to_value(value));
    }

    /// Records both sides and the residual `|lhs - rhs|`, relative to
    /// `max(|lhs|, 1)`, as the headline comparison.
    pub fn compare(&mut self, lhs: Complex64, rhs: Complex64) {
        let abs = (lhs - rhs).norm();
        let rel = abs / lhs.norm().max(1.0);
        if !(lhs.re.is_finite() && lhs.im.is_finite() && rhs.re.is_finite() && rhs.im.is_finite()) {
            self.fail("non-finite side value");
            self.abs_residual = f64::MAX;
            self.rel_residual = f64::MAX;
            return;
        }
        self.lhs = Some(lhs.into());
        self.rhs = Some(rhs.into());
        self.abs_residual = abs;
        self.rel_residual = rel;
        if !(rel < self.tolerance) {
            self.fail(&format!("relative residual {rel:e} >= tolerance {:e}", self.tolerance));
        }
    }

    /// Adds a sub-check; a non-finite residual counts as a failure.
    pub fn check(&mut self, name: &str, residual: f64, tolerance: f64) -> bool {
        let passed = residual.is_finite() && residual <= tolerance;
        self.checks.push(SubCheck {
            name: name.to_string(),
            residual: finite_or(residual, f64::MAX),
            tolerance,
            passed,
            note: None,
        });
        if !passed {
            self.fail(name);
        }
        passed
    }

    /// Adds a sub-check that is informational only.
    pub fn note(&mut self, name: &str, residual: f64, note: &str) {
        self.checks.push(SubCheck {
            name: name.to_string(),
            residual: finite_or(residual, f64::MAX),
            tolerance: f64::MAX,
            passed: true,
            note: Some(note.to_string()),
        });
    }

    pub fn fail(&mut self, what: &str) {
        self.passed = false;
        if self.first_failure.is_none() {
            self.first_failure = Some(what.to_string());
        }
    }

    /// Canonical JSON: deterministic key order, no timing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

fn to_value(v: impl Serialize) -> Value {
    match serde_json::to_value(v) {
        Ok(Value::Number(n)) if n.as_f64().is_some_and(|x| !x.is_finite()) => Value::Null,
        Ok(v) => v,
        Err(_) => Value::Null,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_values_fail_without_leaking_nan() {
        let mut r = VerificationReport::new("t", "test.anchor", 1e-6);
        r.compare(Complex64::new(f64::NAN, 0.0), Complex64::new(1.0, 0.0));
        r.check("inf", f64::INFINITY, 1.0);
        assert!(!r.passed);
        let json = r.canonical_json();
        assert!(!json.contains("NaN") && !json.contains("null"));
        assert_eq!(r.first_failure.as_deref(), Some("non-finite side value"));
    }

    #[test]
    fn timing_is_not_canonical() {
        let mut a = VerificationReport::new("t", "test.anchor", 1e-6).input("q", 5);
        a.compare(Complex64::new(1.0, 0.0), Complex64::new(1.0, 1e-9));
        let mut b = a.clone();
        a.wall_time = 1.0;
        b.wall_time = 2.0;
        assert_eq!(a.canonical_json(), b.canonical_json());
        assert!(a.passed);
    }
}
