//! Statistical experiments and their plumbing.

pub mod experiments;
pub mod gof;
pub mod report;

pub use experiments::{
    bands, center_of_mass, clt_critical, clt_diffusive, cm_checks, fclt_covariance,
    fluctuation_gaussianity, lil_monitor, qsl_critical, qsl_diffusive, slln_check,
    superdiffusive_l, ExperimentOutput, ReplicaStat, SeriesData, Tolerances,
};
pub use gof::{chi_square_gof, ks_test, normality_test, ChiSquareResult, KsResult};
pub use report::{EstimateWithCI, ExperimentReport, TestResult, Verdict};

use crate::error::{Error, Result};
use crate::numeric::std_normal_quantile;
use crate::process::{Regime, WalkParams};

/// Mean with normal-theory confidence interval.
pub fn summarize_mean(values: &[f64], confidence: f64) -> EstimateWithCI {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    let stderr = (var / m).sqrt();
    let z = std_normal_quantile(0.5 + confidence / 2.0);
    EstimateWithCI {
        value: mean,
        stderr,
        ci_low: mean - z * stderr,
        ci_high: mean + z * stderr,
        confidence,
        replicas: values.len() as u64,
    }
}

/// Sample variance (unbiased) with the normal-theory standard error
/// s^2 sqrt(2/(m-1)); adequate for the near-Gaussian statistics the
/// experiments produce.
pub fn summarize_variance(values: &[f64], confidence: f64) -> EstimateWithCI {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    let stderr = var * (2.0 / (m - 1.0)).sqrt();
    let z = std_normal_quantile(0.5 + confidence / 2.0);
    EstimateWithCI {
        value: var,
        stderr,
        ci_low: var - z * stderr,
        ci_high: var + z * stderr,
        confidence,
        replicas: values.len() as u64,
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut xs = values.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("NaN value"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Stable per-experiment seed derivation (SplitMix64 finalizer), so the
/// experiments of one suite draw from unrelated ChaCha keys.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sizes and grids for a regime suite.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub n: u64,
    pub replicas: u64,
    pub seed: u64,
    pub tol: Tolerances,
    pub n_grid: Vec<u64>,
    pub t_grid: Vec<f64>,
    pub n_inner: u64,
    pub n_outer: u64,
}

impl SuiteConfig {
    /// Defaults derived from (n, replicas, seed): slln grid n/100, n/10, n;
    /// fluctuation horizons n/100 and n; time grid {0.25, 0.5, 1}.
    pub fn new(n: u64, replicas: u64, seed: u64) -> Self {
        SuiteConfig {
            n,
            replicas,
            seed,
            tol: Tolerances::default(),
            n_grid: vec![(n / 100).max(1), (n / 10).max(1), n],
            t_grid: vec![0.25, 0.5, 1.0],
            n_inner: (n / 100).max(2),
            n_outer: n,
        }
    }
}

/// Run the regime-appropriate battery. Path-statistic experiments are run
/// at a reduced replica count (they cost O(n) per replica at every k, not
/// just the endpoint): quadratic strong laws at most 200 replicas, the
/// iterated-logarithm monitor at most 100, the bracket check at most 2000.
///
/// KS-gated tests share a Bonferroni correction: each is gated at
/// ks_p_min / k where k is the number of such tests in the suite.
pub fn run_suite(
    params: &WalkParams,
    cfg: &SuiteConfig,
) -> Result<(ExperimentReport, Vec<(String, Vec<SeriesData>)>)> {
    let start = std::time::Instant::now();
    let regime = params.regime();
    // Bonferroni count: KS-gated experiments per regime
    let bonferroni_k: u32 = match regime {
        Regime::Diffusive => 1,      // clt_diffusive
        Regime::Critical => 0,       // critical CLT's KS is advisory
        Regime::Superdiffusive => 1, // fluctuation_gaussianity
    };
    let tol = Tolerances {
        ks_p_min: if bonferroni_k > 1 {
            cfg.tol.ks_p_min / bonferroni_k as f64
        } else {
            cfg.tol.ks_p_min
        },
        ..cfg.tol
    };
    let mut outputs: Vec<ExperimentOutput> = Vec::new();
    let seed_for = |tag: u64| derive_seed(cfg.seed, tag);
    match regime {
        Regime::Diffusive => {
            outputs.push(slln_check(params, &cfg.n_grid, cfg.replicas.min(2000), seed_for(1), &tol)?);
            outputs.push(clt_diffusive(params, cfg.n, cfg.replicas, seed_for(2), &tol)?);
            outputs.push(qsl_diffusive(params, cfg.n, cfg.replicas.min(200), seed_for(3), &tol)?);
            outputs.push(fclt_covariance(params, &cfg.t_grid, cfg.n, cfg.replicas, seed_for(4), &tol)?);
            outputs.push(cm_checks(params, cfg.n, cfg.replicas, seed_for(5), &tol)?);
            let bracket = crate::martingale::normalized_bracket_limit_check(
                params,
                cfg.n,
                cfg.replicas.min(2000),
                seed_for(6),
                0.05 * tol.scale,
            )?;
            outputs.push(ExperimentOutput { result: bracket, series: Vec::new() });
            if cfg.n >= 100_000 {
                outputs.push(lil_monitor(params, cfg.n, cfg.replicas.min(100), seed_for(7), &tol)?);
            }
        }
        Regime::Critical => {
            outputs.push(slln_check(params, &cfg.n_grid, cfg.replicas.min(2000), seed_for(1), &tol)?);
            outputs.push(clt_critical(params, cfg.n, cfg.replicas, seed_for(2), &tol)?);
            outputs.push(qsl_critical(params, cfg.n, cfg.replicas.min(200), seed_for(3), &tol)?);
            outputs.push(cm_checks(params, cfg.n, cfg.replicas, seed_for(5), &tol)?);
            if cfg.n >= 1_000_000 {
                outputs.push(lil_monitor(params, cfg.n, cfg.replicas.min(100), seed_for(7), &tol)?);
            }
        }
        Regime::Superdiffusive => {
            outputs.push(slln_check(params, &cfg.n_grid, cfg.replicas.min(2000), seed_for(1), &tol)?);
            outputs.push(superdiffusive_l(params, cfg.n, cfg.replicas, seed_for(8), &tol)?);
            outputs.push(fluctuation_gaussianity(
                params,
                cfg.n_inner,
                cfg.n_outer,
                cfg.replicas.min(2000),
                seed_for(9),
                &tol,
            )?);
            outputs.push(cm_checks(params, cfg.n, cfg.replicas, seed_for(5), &tol)?);
        }
    }
    let mut results = Vec::new();
    let mut all_series = Vec::new();
    for out in outputs {
        all_series.push((out.result.name.clone(), out.series));
        results.push(out.result);
    }
    let report = ExperimentReport {
        p: params.p(),
        q: params.q(),
        s: params.s(),
        a: params.a(),
        regime: regime.as_str().to_string(),
        n: cfg.n,
        replicas: cfg.replicas,
        seed: cfg.seed,
        tolerance_scale: cfg.tol.scale,
        bonferroni_k,
        results,
        wall_secs: start.elapsed().as_secs_f64(),
    };
    Ok((report, all_series))
}

/// Dispatch one experiment by name (the CLI surface).
pub fn run_named(
    params: &WalkParams,
    name: &str,
    cfg: &SuiteConfig,
) -> Result<ExperimentOutput> {
    let tol = cfg.tol;
    match name {
        "slln" => slln_check(params, &cfg.n_grid, cfg.replicas, cfg.seed, &tol),
        "clt_diffusive" => clt_diffusive(params, cfg.n, cfg.replicas, cfg.seed, &tol),
        "clt_critical" => clt_critical(params, cfg.n, cfg.replicas, cfg.seed, &tol),
        "qsl_diffusive" => qsl_diffusive(params, cfg.n, cfg.replicas, cfg.seed, &tol),
        "qsl_critical" => qsl_critical(params, cfg.n, cfg.replicas, cfg.seed, &tol),
        "lil_monitor" => lil_monitor(params, cfg.n, cfg.replicas, cfg.seed, &tol),
        "fclt_covariance" => fclt_covariance(params, &cfg.t_grid, cfg.n, cfg.replicas, cfg.seed, &tol),
        "cm_checks" => cm_checks(params, cfg.n, cfg.replicas, cfg.seed, &tol),
        "superdiffusive_l" => superdiffusive_l(params, cfg.n, cfg.replicas, cfg.seed, &tol),
        "fluctuation_gaussianity" => fluctuation_gaussianity(
            params,
            cfg.n_inner,
            cfg.n_outer,
            cfg.replicas,
            cfg.seed,
            &tol,
        ),
        "normalized_bracket" => {
            let r = crate::martingale::normalized_bracket_limit_check(
                params,
                cfg.n,
                cfg.replicas,
                cfg.seed,
                0.05 * tol.scale,
            )?;
            Ok(ExperimentOutput { result: r, series: Vec::new() })
        }
        other => Err(Error::Invalid {
            what: "experiment",
            reason: format!(
                "unknown experiment '{other}'; expected one of slln, clt_diffusive, \
                 clt_critical, qsl_diffusive, qsl_critical, lil_monitor, fclt_covariance, \
                 cm_checks, superdiffusive_l, fluctuation_gaussianity, normalized_bracket"
            ),
        }),
    }
}
