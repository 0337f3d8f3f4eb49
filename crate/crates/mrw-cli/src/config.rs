//! Experiment configuration: a flat key = value file plus command-line
//! overrides (flags win). Unknown keys are rejected so typos fail loudly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Raw option bag before validation; every field optional so the file and
/// the flags can each fill any subset.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub s: Option<f64>,
    pub experiment: Option<String>,
    pub n: Option<u64>,
    pub replicas: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub tolerance_scale: Option<f64>,
    pub n_grid: Option<Vec<u64>>,
    pub t_grid: Option<Vec<f64>>,
    pub n_inner: Option<u64>,
    pub n_outer: Option<u64>,
}

impl Overrides {
    /// Later (flag-level) values win over earlier (file-level) ones.
    pub fn merged_over(self, base: Overrides) -> Overrides {
        Overrides {
            p: self.p.or(base.p),
            q: self.q.or(base.q),
            s: self.s.or(base.s),
            experiment: self.experiment.or(base.experiment),
            n: self.n.or(base.n),
            replicas: self.replicas.or(base.replicas),
            seed: self.seed.or(base.seed),
            workers: self.workers.or(base.workers),
            out: self.out.or(base.out),
            tolerance_scale: self.tolerance_scale.or(base.tolerance_scale),
            n_grid: self.n_grid.or(base.n_grid),
            t_grid: self.t_grid.or(base.t_grid),
            n_inner: self.n_inner.or(base.n_inner),
            n_outer: self.n_outer.or(base.n_outer),
        }
    }
}

fn parse_list<T: std::str::FromStr>(value: &str, key: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|_| ConfigError(format!("config key '{key}': bad list entry '{part}'")))
        })
        .collect()
}

/// Parse a `key = value` file. Blank lines and `#` comments are skipped.
pub fn parse_config_file(path: &Path) -> Result<Overrides, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!("config line {}: expected 'key = value'", lineno + 1));
        };
        if map.insert(key.trim().to_string(), value.trim().to_string()).is_some() {
            return err(format!("config line {}: duplicate key '{}'", lineno + 1, key.trim()));
        }
    }
    let mut o = Overrides::default();
    for (key, value) in map {
        let parse_f64 = || -> Result<f64, ConfigError> {
            value.parse().map_err(|_| ConfigError(format!("config key '{key}': bad float '{value}'")))
        };
        let parse_u64 = || -> Result<u64, ConfigError> {
            value.parse().map_err(|_| ConfigError(format!("config key '{key}': bad integer '{value}'")))
        };
        match key.as_str() {
            "p" => o.p = Some(parse_f64()?),
            "q" => o.q = Some(parse_f64()?),
            "s" => o.s = Some(parse_f64()?),
            "experiment" => o.experiment = Some(value.clone()),
            "n" => o.n = Some(parse_u64()?),
            "replicas" => o.replicas = Some(parse_u64()?),
            "seed" => o.seed = Some(parse_u64()?),
            "workers" => {
                o.workers = Some(value.parse().map_err(|_| {
                    ConfigError(format!("config key 'workers': bad integer '{value}'"))
                })?)
            }
            "out" => o.out = Some(PathBuf::from(&value)),
            "tolerance_scale" => o.tolerance_scale = Some(parse_f64()?),
            "n_grid" => o.n_grid = Some(parse_list(&value, "n_grid")?),
            "t_grid" => o.t_grid = Some(parse_list(&value, "t_grid")?),
            "n_inner" => o.n_inner = Some(parse_u64()?),
            "n_outer" => o.n_outer = Some(parse_u64()?),
            other => return err(format!("unknown config key '{other}'")),
        }
    }
    Ok(o)
}

/// Validated settings, echoed verbatim into the results file.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub experiment: Option<String>,
    pub n: u64,
    pub replicas: u64,
    pub seed: u64,
    /// Execution detail: affects wall time only, so it is never serialized.
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub out: PathBuf,
    pub tolerance_scale: f64,
    pub n_grid: Vec<u64>,
    pub t_grid: Vec<f64>,
    pub n_inner: u64,
    pub n_outer: u64,
}

/// Validate the merged option bag. `require_seed` is set in suite mode:
/// reproducibility is a product feature, so suites never self-seed.
pub fn validate(o: Overrides, require_seed: bool) -> Result<Settings, ConfigError> {
    let p = o.p.ok_or_else(|| ConfigError("missing parameter p".into()))?;
    let q = o.q.ok_or_else(|| ConfigError("missing parameter q".into()))?;
    let s = o.s.ok_or_else(|| ConfigError("missing parameter s".into()))?;
    let seed = match (o.seed, require_seed) {
        (Some(v), _) => v,
        (None, true) => {
            return err("suite mode requires an explicit seed (wall-clock seeding is not supported)")
        }
        (None, false) => 42, // fixed documented default; never the clock
    };
    let n = o.n.unwrap_or(10_000);
    if n < 1 {
        return err("n must be at least 1");
    }
    let replicas = o.replicas.unwrap_or(1_000);
    if replicas < 1 {
        return err("replicas must be at least 1");
    }
    let tolerance_scale = o.tolerance_scale.unwrap_or(1.0);
    if !(tolerance_scale > 0.0) {
        return err("tolerance_scale must be positive");
    }
    if let Some(w) = o.workers {
        if w < 1 {
            return err("workers must be at least 1");
        }
    }
    let n_grid = o.n_grid.unwrap_or_else(|| vec![(n / 100).max(1), (n / 10).max(1), n]);
    if n_grid.is_empty() || n_grid.iter().any(|&g| g < 1 || g > n) {
        return err("n_grid entries must lie in 1..=n");
    }
    let t_grid = o.t_grid.unwrap_or_else(|| vec![0.25, 0.5, 1.0]);
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return err("t_grid entries must lie in (0, 1]");
    }
    let n_inner = o.n_inner.unwrap_or((n / 100).max(2));
    let n_outer = o.n_outer.unwrap_or(n);
    if n_outer <= n_inner {
        return err("n_outer must exceed n_inner");
    }
    Ok(Settings {
        p,
        q,
        s,
        experiment: o.experiment,
        n,
        replicas,
        seed,
        workers: o.workers,
        out: o.out.unwrap_or_else(|| PathBuf::from("mrw-out")),
        tolerance_scale,
        n_grid,
        t_grid,
        n_inner,
        n_outer,
    })
}
