//! `mrw` — run reproducible experiments on the minimal random walk, dump
//! its exact oracles, or trace single paths in martingale coordinates.
//!
//! Exit codes: 0 = every verdict passed, 1 = at least one statistical
//! fail, 2 = configuration or usage error.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{parse_config_file, validate, Overrides, Settings};
use mrw_core::oracle::{
    eps2_mean, exact_distribution_with_cap, limit_constants, mean_m2, mean_sn,
    mean_sn_recursive, second_moment_sn, second_moment_sn_recursive,
};
use mrw_core::sequences::shared_table;
use mrw_core::stats::{
    run_named, run_suite, ExperimentOutput, ExperimentReport, SeriesData, SuiteConfig,
    Tolerances, Verdict,
};
use mrw_core::{simulate_collapsed, RngStream, WalkParams};

#[derive(Parser)]
#[command(
    name = "mrw",
    version,
    about = "Simulation laboratory for the minimal random walk",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one named experiment and write results.json plus per-replica CSVs.
    Run(CommonArgs),
    /// Run the regime-appropriate experiment battery (explicit seed required).
    Suite(CommonArgs),
    /// Dump the exact oracles: pmf.csv, moments.csv, constants.json.
    Oracle(OracleArgs),
    /// Emit one path in martingale coordinates as trace.csv.
    Trace(TraceArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Flat key = value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    /// Experiment name (run mode): slln, clt_diffusive, clt_critical,
    /// qsl_diffusive, qsl_critical, lil_monitor, fclt_covariance, cm_checks,
    /// superdiffusive_l, fluctuation_gaussianity, normalized_bracket.
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (affects wall time only, never results).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Multiplies every relative verdict band.
    #[arg(long)]
    tolerance_scale: Option<f64>,
    /// Comma-separated checkpoint list for slln.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<u64>>,
    /// Comma-separated time grid in (0, 1] for fclt_covariance.
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    #[arg(long)]
    n_inner: Option<u64>,
    #[arg(long)]
    n_outer: Option<u64>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    s: f64,
    /// Horizon for the exact distribution and moment tables.
    #[arg(long, default_value_t = 100)]
    n: u64,
    /// Cap on the O(n^2) distribution sweep.
    #[arg(long, default_value_t = mrw_core::oracle::DEFAULT_MAX_EXACT_N)]
    max_n: u64,
    #[arg(long, default_value = "mrw-out")]
    out: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    s: f64,
    #[arg(long, default_value_t = 10_000)]
    n: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "mrw-out")]
    out: PathBuf,
}

impl CommonArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            p: self.p,
            q: self.q,
            s: self.s,
            experiment: self.experiment.clone(),
            n: self.n,
            replicas: self.replicas,
            seed: self.seed,
            workers: self.workers,
            out: self.out.clone(),
            tolerance_scale: self.tolerance_scale,
            n_grid: self.n_grid.clone(),
            t_grid: self.t_grid.clone(),
            n_inner: self.n_inner,
            n_outer: self.n_outer,
        }
    }
}

/// Top-level results document. Everything except `timings` is a pure
/// function of the configuration.
#[derive(Serialize)]
struct ResultsFile<'a> {
    version: String,
    config: &'a Settings,
    report: ExperimentReport,
    timings: Timings,
}

#[derive(Serialize)]
struct Timings {
    wall_secs: f64,
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run(args) => run_or_suite(args, false),
        Cmd::Suite(args) => run_or_suite(args, true),
        Cmd::Oracle(args) => oracle_dump(args),
        Cmd::Trace(args) => trace(args),
    }
}

fn load_settings(args: &CommonArgs, suite: bool) -> Result<Settings, ExitCode> {
    let base = match &args.config {
        Some(path) => parse_config_file(path).map_err(usage_error)?,
        None => Overrides::default(),
    };
    let merged = args.to_overrides().merged_over(base);
    validate(merged, suite).map_err(usage_error)
}

fn build_params(settings: &Settings) -> Result<WalkParams, ExitCode> {
    WalkParams::new(settings.p, settings.q, settings.s).map_err(usage_error)
}

fn with_pool<T>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

fn run_or_suite(args: CommonArgs, suite: bool) -> ExitCode {
    let settings = match load_settings(&args, suite) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let params = match build_params(&settings) {
        Ok(p) => p,
        Err(code) => return code,
    };
    if !suite && settings.experiment.is_none() {
        return usage_error("run mode needs --experiment (or an 'experiment' config key)");
    }
    let cfg = SuiteConfig {
        n: settings.n,
        replicas: settings.replicas,
        seed: settings.seed,
        tol: Tolerances { scale: settings.tolerance_scale, ..Tolerances::default() },
        n_grid: settings.n_grid.clone(),
        t_grid: settings.t_grid.clone(),
        n_inner: settings.n_inner,
        n_outer: settings.n_outer,
    };
    let started = std::time::Instant::now();
    let outcome = with_pool(settings.workers, || {
        if suite {
            run_suite(&params, &cfg).map(|(report, series)| (report, series))
        } else {
            let name = settings.experiment.clone().unwrap();
            run_named(&params, &name, &cfg).map(|out| {
                let ExperimentOutput { result, series } = out;
                let report = ExperimentReport {
                    p: params.p(),
                    q: params.q(),
                    s: params.s(),
                    a: params.a(),
                    regime: params.regime().as_str().to_string(),
                    n: cfg.n,
                    replicas: cfg.replicas,
                    seed: cfg.seed,
                    tolerance_scale: cfg.tol.scale,
                    bonferroni_k: 1,
                    results: vec![result.clone()],
                    wall_secs: 0.0,
                };
                (report, vec![(result.name.clone(), series)])
            })
        }
    });
    let (mut report, series) = match outcome {
        Ok(v) => v,
        // invalid parameter combinations (regime mismatch, degeneracy,
        // unknown experiment) are configuration errors
        Err(e) => return usage_error(e),
    };
    report.wall_secs = started.elapsed().as_secs_f64();
    if let Err(e) = write_outputs(&settings, &report, &series) {
        return usage_error(e);
    }
    for r in &report.results {
        let p_str = r
            .p_value
            .map(|p| format!(", p = {p:.4}"))
            .unwrap_or_default();
        println!(
            "{:<28} {:>9} statistic {:.6e} target {:.6e}{}",
            r.name,
            match r.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "FAIL",
                Verdict::Advisory => "advisory",
            },
            r.statistic,
            r.target,
            p_str
        );
    }
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn write_outputs(
    settings: &Settings,
    report: &ExperimentReport,
    series: &[(String, Vec<SeriesData>)],
) -> std::io::Result<()> {
    std::fs::create_dir_all(&settings.out)?;
    let results = ResultsFile {
        version: format!("mrw {}", env!("CARGO_PKG_VERSION")),
        config: settings,
        report: ExperimentReport { wall_secs: 0.0, ..report.clone() },
        timings: Timings { wall_secs: report.wall_secs },
    };
    output::write_json(&settings.out.join("results.json"), &results)?;
    for (test_name, test_series) in series {
        for sd in test_series {
            let file = settings.out.join(format!("{test_name}.{}.csv", sd.name));
            output::write_replica_csv(&file, &sd.rows)?;
        }
    }
    Ok(())
}

fn oracle_dump(args: OracleArgs) -> ExitCode {
    let params = match WalkParams::new(args.p, args.q, args.s) {
        Ok(p) => p,
        Err(e) => return usage_error(e),
    };
    let dist = match exact_distribution_with_cap(&params, args.n, args.max_n) {
        Ok(d) => d,
        Err(e) => return usage_error(e),
    };
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        return usage_error(e);
    }
    // pmf.csv: k, probability
    let pmf_rows: Vec<Vec<f64>> = dist
        .pmf()
        .iter()
        .enumerate()
        .map(|(k, &prob)| vec![k as f64, prob])
        .collect();
    if let Err(e) = output::write_table_csv(&args.out.join("pmf.csv"), "k,probability", &pmf_rows) {
        return usage_error(e);
    }
    // moments.csv: closed forms and recursions side by side
    let mut rows = Vec::with_capacity(args.n as usize);
    for n in 1..=args.n {
        rows.push(vec![
            n as f64,
            mean_sn(&params, n),
            mean_sn_recursive(&params, n),
            second_moment_sn(&params, n),
            second_moment_sn_recursive(&params, n),
            mean_m2(&params, n),
            eps2_mean(&params, n),
        ]);
    }
    if let Err(e) = output::write_table_csv(
        &args.out.join("moments.csv"),
        "n,mean,mean_recursive,second_moment,second_moment_recursive,mean_m2,eps2_mean",
        &rows,
    ) {
        return usage_error(e);
    }
    // constants.json
    #[derive(Serialize)]
    struct ConstantsFile {
        p: f64,
        q: f64,
        s: f64,
        a: f64,
        regime: String,
        constants: mrw_core::oracle::LimitConstants,
    }
    let doc = ConstantsFile {
        p: params.p(),
        q: params.q(),
        s: params.s(),
        a: params.a(),
        regime: params.regime().as_str().to_string(),
        constants: limit_constants(&params),
    };
    if let Err(e) = output::write_json(&args.out.join("constants.json"), &doc) {
        return usage_error(e);
    }
    println!(
        "oracle tables for (p, q, s) = ({}, {}, {}) written to {}",
        params.p(),
        params.q(),
        params.s(),
        args.out.display()
    );
    ExitCode::SUCCESS
}

fn trace(args: TraceArgs) -> ExitCode {
    let params = match WalkParams::new(args.p, args.q, args.s) {
        Ok(p) => p,
        Err(e) => return usage_error(e),
    };
    if params.a() <= -1.0 {
        return usage_error("trace needs a > -1 for the martingale coordinates");
    }
    let table = match shared_table(params.a(), args.n) {
        Ok(t) => t,
        Err(e) => return usage_error(e),
    };
    let mut rng = RngStream::new(args.seed);
    let path = match simulate_collapsed(&params, args.n, &mut rng) {
        Ok(p) => p,
        Err(e) => return usage_error(e),
    };
    let mp = match mrw_core::martingale::transform(&path, &params, &table) {
        Ok(m) => m,
        Err(e) => return usage_error(e),
    };
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        return usage_error(e);
    }
    let mu = params.mean_rate();
    let mut rows = Vec::with_capacity(args.n as usize);
    let mut qsl_acc = 0.0;
    for k in 1..=args.n {
        let s_k = path.position(k) as f64;
        let frac = s_k / k as f64;
        let dev = frac - mu;
        qsl_acc += dev * dev;
        let qsl_partial = if k >= 2 { qsl_acc / (k as f64).ln() } else { 0.0 };
        rows.push(vec![
            k as f64,
            s_k,
            frac,
            mp.m[k as usize],
            mp.bracket[k as usize],
            qsl_partial,
        ]);
    }
    let written = output::write_table_csv(
        &args.out.join("trace.csv"),
        "k,s_k,s_k_over_k,m_k,bracket_k,qsl_partial",
        &rows,
    );
    if let Err(e) = written {
        return usage_error(e);
    }
    println!("trace of {} steps written to {}", args.n, args.out.display());
    ExitCode::SUCCESS
}
