//! Python extension module exposing the walk, its exact oracles, and the
//! experiment runner. Built as `mrw_py`; see python/smoke_test.py.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mrw_core::oracle;
use mrw_core::sequences;
use mrw_core::stats::{run_named, run_suite, SuiteConfig, Tolerances};
use mrw_core::{simulate_batch, Sampler, WalkParams};

fn to_py_err(e: mrw_core::Error) -> PyError {
    PyValueError::new_err(e.to_string())
}

type PyError = PyErr;

/// The validated parameter triple (p, q, s).
#[pyclass(name = "Walk", skip_from_py_object)]
#[derive(Clone)]
struct PyWalk {
    inner: WalkParams,
}

#[pymethods]
impl PyWalk {
    #[new]
    fn new(p: f64, q: f64, s: f64) -> PyResult<Self> {
        Ok(PyWalk { inner: WalkParams::new(p, q, s).map_err(to_py_err)? })
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }
    #[getter]
    fn q(&self) -> f64 {
        self.inner.q()
    }
    #[getter]
    fn s(&self) -> f64 {
        self.inner.s()
    }
    /// Memory parameter a = p - q.
    #[getter]
    fn a(&self) -> f64 {
        self.inner.a()
    }

    fn regime(&self) -> String {
        self.inner.regime().as_str().to_string()
    }

    fn mean_rate(&self) -> f64 {
        self.inner.mean_rate()
    }

    fn sigma2(&self) -> f64 {
        self.inner.sigma2()
    }

    /// Conditional step probability q + a s_n / n.
    fn step_probability(&self, s_n: u64, n: u64) -> PyResult<f64> {
        mrw_core::step_probability(&self.inner, s_n, n).map_err(to_py_err)
    }

    /// Exact law of S_n as a list of probabilities over 0..=n.
    #[pyo3(signature = (n, max_n = oracle::DEFAULT_MAX_EXACT_N))]
    fn exact_pmf(&self, n: u64, max_n: u64) -> PyResult<Vec<f64>> {
        Ok(oracle::exact_distribution_with_cap(&self.inner, n, max_n)
            .map_err(to_py_err)?
            .pmf()
            .to_vec())
    }

    fn mean_sn(&self, n: u64) -> f64 {
        oracle::mean_sn(&self.inner, n)
    }

    fn second_moment_sn(&self, n: u64) -> f64 {
        oracle::second_moment_sn(&self.inner, n)
    }

    fn mean_m2(&self, n: u64) -> f64 {
        oracle::mean_m2(&self.inner, n)
    }

    fn eps2_mean(&self, n: u64) -> f64 {
        oracle::eps2_mean(&self.inner, n)
    }

    /// Closed-form limit constants as a dict (regime-dependent entries are
    /// present only where defined).
    fn limit_constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = oracle::limit_constants(&self.inner);
        let d = PyDict::new(py);
        d.set_item("sigma2", c.sigma2)?;
        d.set_item("nu", c.nu)?;
        d.set_item("b", c.b)?;
        d.set_item("e_m", c.e_m)?;
        for (key, value) in [
            ("ell", c.ell),
            ("tau", c.tau),
            ("e_l", c.e_l),
            ("e_l2", c.e_l2),
            ("e_m2", c.e_m2),
            ("sn2_rate", c.sn2_rate),
        ] {
            if let Some(v) = value {
                d.set_item(key, v)?;
            }
        }
        Ok(d)
    }

    /// One path: positions S_0..S_n under the collapsed sampler.
    fn simulate(&self, n: u64, seed: u64) -> PyResult<Vec<u32>> {
        let mut rng = mrw_core::RngStream::new(seed);
        Ok(mrw_core::simulate_collapsed(&self.inner, n, &mut rng)
            .map_err(to_py_err)?
            .positions()
            .to_vec())
    }

    /// Final positions of `replicas` independent replicas
    /// (sampler: "collapsed" or "full_memory").
    #[pyo3(signature = (n, replicas, seed, sampler = "collapsed"))]
    fn simulate_final(&self, n: u64, replicas: u64, seed: u64, sampler: &str) -> PyResult<Vec<u64>> {
        let kind = match sampler {
            "collapsed" => Sampler::Collapsed,
            "full_memory" => Sampler::FullMemory,
            other => return Err(PyValueError::new_err(format!("unknown sampler '{other}'"))),
        };
        simulate_batch(&self.inner, n, replicas, seed, kind, |iter| {
            iter.last().map(|(_, s)| s).unwrap_or(0)
        })
        .map_err(to_py_err)
    }

    /// Run one experiment; returns the report as a JSON string.
    #[pyo3(signature = (name, n, replicas, seed, tolerance_scale = 1.0))]
    fn run_experiment(
        &self,
        name: &str,
        n: u64,
        replicas: u64,
        seed: u64,
        tolerance_scale: f64,
    ) -> PyResult<String> {
        let cfg = SuiteConfig {
            tol: Tolerances { scale: tolerance_scale, ..Tolerances::default() },
            ..SuiteConfig::new(n, replicas, seed)
        };
        let out = run_named(&self.inner, name, &cfg).map_err(to_py_err)?;
        serde_json::to_string(&out.result).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Run the regime-appropriate suite; returns the report as JSON.
    #[pyo3(signature = (n, replicas, seed, tolerance_scale = 1.0))]
    fn run_suite(&self, n: u64, replicas: u64, seed: u64, tolerance_scale: f64) -> PyResult<String> {
        let cfg = SuiteConfig {
            tol: Tolerances { scale: tolerance_scale, ..Tolerances::default() },
            ..SuiteConfig::new(n, replicas, seed)
        };
        let (report, _) = run_suite(&self.inner, &cfg).map_err(to_py_err)?;
        serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Walk(p={}, q={}, s={}, a={}, regime='{}')",
            self.inner.p(),
            self.inner.q(),
            self.inner.s(),
            self.inner.a(),
            self.inner.regime()
        )
    }
}

/// a_n = Gamma(n) Gamma(a+1) / Gamma(n+a) by the forward recurrence.
#[pyfunction]
fn a_seq(a: f64, n: u64) -> PyResult<f64> {
    sequences::a_seq(a, n).map_err(to_py_err)
}

/// A_n = sum of a_k, closed form.
#[pyfunction]
fn big_a(a: f64, n: u64) -> PyResult<f64> {
    sequences::big_a(a, n).map_err(to_py_err)
}

/// v_n = sum of a_k^2.
#[pyfunction]
fn v_seq(a: f64, n: u64) -> PyResult<f64> {
    sequences::v_seq(a, n).map_err(to_py_err)
}

/// Diffusive limit of v_n / n^{1-2a}.
#[pyfunction]
fn v_limit_diffusive(a: f64) -> PyResult<f64> {
    sequences::v_limit_diffusive(a).map_err(to_py_err)
}

/// Superdiffusive limit of v_n (3F2 at unit argument), certified to rel_tol.
#[pyfunction]
#[pyo3(signature = (a, rel_tol = 1e-10))]
fn v_limit_superdiffusive(a: f64, rel_tol: f64) -> PyResult<f64> {
    sequences::v_limit_superdiffusive(a, rel_tol).map_err(to_py_err)
}

#[pymodule]
fn mrw_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWalk>()?;
    m.add_function(wrap_pyfunction!(a_seq, m)?)?;
    m.add_function(wrap_pyfunction!(big_a, m)?)?;
    m.add_function(wrap_pyfunction!(v_seq, m)?)?;
    m.add_function(wrap_pyfunction!(v_limit_diffusive, m)?)?;
    m.add_function(wrap_pyfunction!(v_limit_superdiffusive, m)?)?;
    Ok(())
}
