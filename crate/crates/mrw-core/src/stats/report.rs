//! Result types shared by every experiment.

use serde::{Deserialize, Serialize};

/// Point estimate with a symmetric normal-theory confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub value: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub replicas: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Reported but never gating: used by monitors whose limit statement
    /// is not testable at finite horizon (e.g. limsup envelopes).
    Advisory,
}

impl Verdict {
    pub fn passed(self) -> bool {
        !matches!(self, Verdict::Fail)
    }
}

/// One named check against a limit constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub target: f64,
    pub estimate: EstimateWithCI,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

/// A suite of checks for one parameter triple. Everything except
/// `wall_secs` is a pure function of (params, n, replicas, seed, grids,
/// tolerances).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub a: f64,
    pub regime: String,
    pub n: u64,
    pub replicas: u64,
    pub seed: u64,
    pub tolerance_scale: f64,
    /// Number of p-value-gated tests sharing the suite-level Bonferroni
    /// correction (each is gated at ks_p_min / bonferroni_k).
    pub bonferroni_k: u32,
    pub results: Vec<TestResult>,
    pub wall_secs: f64,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.verdict.passed())
    }
}
