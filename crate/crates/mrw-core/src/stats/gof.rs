//! Goodness-of-fit machinery: one-sample Kolmogorov-Smirnov against a
//! fully specified CDF, and a chi-square test for discrete laws with
//! small-expectation bin merging.

use crate::error::{Error, Result};
use crate::numeric::{chi_square_sf, kolmogorov_q, std_normal_cdf};
use crate::stats::report::{TestResult, Verdict};
use crate::stats::summarize_mean;

#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: u64,
}

/// One-sample KS test of `samples` against the continuous CDF `cdf`.
/// The p-value uses the asymptotic Kolmogorov law evaluated at Stephens'
/// finite-n argument (sqrt(n) + 0.12 + 0.11/sqrt(n)) * D_n.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::Invalid { what: "samples", reason: "empty".into() });
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("NaN sample"));
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let lambda = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
    Ok(KsResult { statistic: d, p_value: kolmogorov_q(lambda), n: n as u64 })
}

/// KS test of `samples` against the normal law with the given (known)
/// mean and variance; the null is fully specified, so the p-value is
/// exact-null. Requires at least 100 samples and a positive variance.
pub fn normality_test(
    name: &str,
    samples: &[f64],
    mean: f64,
    variance: f64,
    p_min: f64,
) -> Result<TestResult> {
    if !(variance > 0.0) {
        return Err(Error::Degenerate { op: "normality_test", reason: "variance <= 0" });
    }
    if samples.len() < 100 {
        return Err(Error::Invalid {
            what: "samples",
            reason: format!("need >= 100, got {}", samples.len()),
        });
    }
    let sd = variance.sqrt();
    let ks = ks_test(samples, |x| std_normal_cdf((x - mean) / sd))?;
    let estimate = summarize_mean(samples, 0.99);
    Ok(TestResult {
        name: name.to_string(),
        statistic: ks.statistic,
        p_value: Some(ks.p_value),
        target: mean,
        estimate,
        verdict: if ks.p_value >= p_min { Verdict::Pass } else { Verdict::Fail },
        notes: vec![format!(
            "one-sample KS vs N({mean:.6e}, {variance:.6e}), n = {}, p_min = {p_min}",
            ks.n
        )],
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
    pub bins_used: usize,
}

/// Pearson chi-square of observed counts against expected probabilities.
/// Adjacent cells are pooled until every pooled expectation reaches
/// `min_expected` counts (classical rule of thumb: 5).
pub fn chi_square_gof(
    observed: &[u64],
    expected_probs: &[f64],
    min_expected: f64,
) -> Result<ChiSquareResult> {
    if observed.len() != expected_probs.len() || observed.is_empty() {
        return Err(Error::Invalid {
            what: "chi_square_gof input",
            reason: format!("lengths {} vs {}", observed.len(), expected_probs.len()),
        });
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::Invalid { what: "observed", reason: "no counts".into() });
    }
    let tf = total as f64;
    let mut pooled: Vec<(f64, f64)> = Vec::new(); // (obs, expected_count)
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        acc_o += o as f64;
        acc_e += p * tf;
        if acc_e >= min_expected {
            pooled.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 || acc_o > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += acc_o;
            last.1 += acc_e;
        } else {
            pooled.push((acc_o, acc_e));
        }
    }
    if pooled.len() < 2 {
        return Err(Error::Invalid {
            what: "chi_square_gof bins",
            reason: "fewer than 2 cells after pooling".into(),
        });
    }
    let stat: f64 = pooled.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let df = (pooled.len() - 1) as u64;
    Ok(ChiSquareResult {
        statistic: stat,
        df,
        p_value: chi_square_sf(stat, df as f64),
        bins_used: pooled.len(),
    })
}
