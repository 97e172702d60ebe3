//! Verification records and their serialization.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Output encoding for record streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    Json,
    Tsv,
}

impl std::str::FromStr for RecordFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" | "jsonl" => Ok(RecordFormat::Json),
            "tsv" => Ok(RecordFormat::Tsv),
            other => Err(format!("unknown record format {other:?}")),
        }
    }
}

/// Outcome of one identity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub passed: bool,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub tolerance: f64,
    /// Set when the comparison was decided in exact arithmetic.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<bool>,
    /// Parameters of the check, enough to rerun it in isolation.
    pub spec: Value,
    /// Truncation, contour and provider settings.
    pub metadata: BTreeMap<String, Value>,
}

pub fn relative_error(abs_err: f64, lhs: Complex64, rhs: Complex64) -> f64 {
    abs_err / lhs.norm().max(rhs.norm()).max(1e-30)
}

impl VerificationReport {
    /// A report whose pass criterion is `abs_err <= tolerance`.
    pub fn absolute(check: &str, spec: Value, lhs: Complex64, rhs: Complex64, tolerance: f64) -> Self {
        let abs_err = (lhs - rhs).norm();
        let rel_err = relative_error(abs_err, lhs, rhs);
        VerificationReport {
            check: check.to_string(),
            passed: abs_err <= tolerance,
            lhs,
            rhs,
            abs_err,
            rel_err,
            tolerance,
            exact: None,
            spec,
            metadata: BTreeMap::new(),
        }
    }

    /// A report whose pass criterion is `rel_err <= tolerance`.
    pub fn relative(check: &str, spec: Value, lhs: Complex64, rhs: Complex64, tolerance: f64) -> Self {
        let mut r = Self::absolute(check, spec, lhs, rhs, tolerance);
        r.passed = r.rel_err <= tolerance;
        r
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn tsv_header() -> &'static str {
        "check\tpassed\tabs_err\trel_err\ttolerance\tlhs_re\tlhs_im\trhs_re\trhs_im\texact\tspec\tmetadata"
    }

    pub fn to_tsv_line(&self) -> String {
        let exact = match self.exact {
            Some(true) => "exact-equal",
            Some(false) => "exact-differ",
            None => "-",
        };
        format!(
            "{}\t{}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{}\t{}\t{}",
            self.check,
            if self.passed { "pass" } else { "fail" },
            self.abs_err,
            self.rel_err,
            self.tolerance,
            self.lhs.re,
            self.lhs.im,
            self.rhs.re,
            self.rhs.im,
            exact,
            self.spec,
            serde_json::to_string(&self.metadata).expect("metadata serializes"),
        )
    }

    pub fn render(&self, format: RecordFormat) -> String {
        match format {
            RecordFormat::Json => self.to_json_line(),
            RecordFormat::Tsv => self.to_tsv_line(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn errors_and_pass_flags() {
        let r = VerificationReport::absolute("t", json!({}), Complex64::new(1.0, 0.0), Complex64::new(1.0, 1e-10), 1e-9);
        assert!(r.passed);
        assert!((r.rel_err - 1e-10).abs() < 1e-20);
        let z = VerificationReport::relative("t", json!({}), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), 1e-9);
        assert_eq!(z.rel_err, 0.0);
        assert!(z.passed);
    }

    #[test]
    fn json_roundtrip() {
        let r = VerificationReport::absolute("t", json!({"c": 3}), Complex64::new(0.5, -2.0), Complex64::new(0.5, -2.0), 1e-9)
            .with_meta("n_max", 200);
        let back: VerificationReport = serde_json::from_str(&r.to_json_line()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.to_tsv_line().split('\t').count(), VerificationReport::tsv_header().split('\t').count());
    }
}
