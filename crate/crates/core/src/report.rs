//! Uniform reporting for verification checks: every check produces a named
//! record with its parameters, seed, worst residual, tolerance, and verdict,
//! rendered as one stable text line.

use num_complex::Complex64;
use std::fmt;

/// Outcome of one named verification check.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub name: String,
    /// Human-readable parameter summary (deterministic ordering).
    pub params: String,
    pub seed: u64,
    /// Worst residual observed across the sweep.
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Optional detail line (counts, ranks, localized failures).
    pub detail: String,
}

impl VerificationReport {
    /// Standard pass/fail from a residual against a tolerance.
    pub fn from_residual(
        name: &str,
        params: &str,
        seed: u64,
        residual: f64,
        tolerance: f64,
    ) -> Self {
        VerificationReport {
            name: name.to_string(),
            params: params.to_string(),
            seed,
            residual,
            tolerance,
            pass: residual.is_finite() && residual <= tolerance,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// Force a failure verdict regardless of the residual (for structural
    /// conditions like wrong ranks).
    pub fn failed(mut self, reason: impl Into<String>) -> Self {
        self.pass = false;
        self.detail = reason.into();
        self
    }

    pub fn verdict(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} residual={:.3e} tol={:.1e} seed={} [{}]",
            self.verdict(),
            self.name,
            self.residual,
            self.tolerance,
            self.seed,
            self.params,
        )?;
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

/// Compact complex formatter used in parameter summaries: `a+bi`.
pub fn fmt_c(z: Complex64) -> String {
    if z.im >= 0.0 {
        format!("{}+{}i", trim(z.re), trim(z.im))
    } else {
        format!("{}-{}i", trim(z.re), trim(-z.im))
    }
}

fn trim(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::c64;

    #[test]
    fn display_is_stable() {
        let r = VerificationReport::from_residual("demo.check", "tau=0+0.9i", 7, 1e-12, 1e-9);
        let line = r.to_string();
        assert!(line.starts_with("PASS demo.check"));
        assert!(line.contains("seed=7"));
        let f = r.failed("rank 3 != 4");
        assert!(f.to_string().starts_with("FAIL"));
    }

    #[test]
    fn complex_formatting() {
        assert_eq!(fmt_c(c64(0.0, 0.9)), "0+0.9i");
        assert_eq!(fmt_c(c64(-1.25, -0.5)), "-1.25-0.5i");
    }
}
