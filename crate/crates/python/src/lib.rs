//! Python bindings: EPS swap algebra, kernels, and config-driven runs.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use epsmc::cli::{self, JobConfig, RunOptions, Subcommand};
use epsmc::eps;
use epsmc::oracle::transfer_with_tables;
use epsmc::sampler::{self, expected_q_hat, run_with_workers, Prepared, SamplingStrategy};
use epsmc::{KernelSpec, KernelStrategy, Potential};

fn to_py(e: epsmc::Error) -> PyErr {
    if e.exit_code() == 2 {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse_strategy(name: &str) -> PyResult<KernelStrategy> {
    match name {
        "auto" => Ok(KernelStrategy::Auto),
        "delta" => Ok(KernelStrategy::Delta),
        "airy" => Ok(KernelStrategy::Airy),
        "quadrature" => Ok(KernelStrategy::Quadrature),
        other => Err(PyValueError::new_err(format!("unknown kernel strategy {other:?}"))),
    }
}

fn parse_subcommand(name: &str) -> PyResult<Subcommand> {
    match name {
        "demo-eps" => Ok(Subcommand::DemoEps),
        "sample" => Ok(Subcommand::Sample),
        "oracle" => Ok(Subcommand::Oracle),
        "amplitude" => Ok(Subcommand::Amplitude),
        "reference" => Ok(Subcommand::Reference),
        "compare" => Ok(Subcommand::Compare),
        other => Err(PyValueError::new_err(format!("unknown subcommand {other:?}"))),
    }
}

/// Swap matrix entries `[[m00, m01], [m10, m11]]`.
#[pyfunction]
fn swap_matrix(g: f64, v: f64) -> PyResult<[[f64; 2]; 2]> {
    Ok(eps::swap_matrix(g, v).map_err(to_py)?.entries())
}

/// Closed interval of reference levels valid for `g`.
#[pyfunction]
fn valid_v_interval(g: f64) -> PyResult<(f64, f64)> {
    let i = eps::valid_v_interval(g).map_err(to_py)?;
    Ok((i.lo, i.hi))
}

/// Estimate of the signed product of `ks` and `w`, as `(value, std_error)`.
#[pyfunction]
#[pyo3(signature = (ks, w, v=0.5, histories=1_000_000, seed=0))]
fn simulate_chain(ks: Vec<f64>, w: f64, v: f64, histories: u64, seed: u64) -> PyResult<(f64, f64)> {
    let spec = eps::ChainSpec::new(ks, w, v).map_err(to_py)?;
    let e = eps::simulate_chain(&spec, histories, seed).map_err(to_py)?;
    Ok((e.value, e.std_error))
}

#[pyfunction]
fn airy_ai(z: f64) -> f64 {
    epsmc::airy_ai(z)
}

/// Kernel density at noise `y` for a particle at `u` in the polynomial potential.
#[pyfunction]
#[pyo3(signature = (y, u, coefficients, strategy="auto"))]
fn kernel_value(y: f64, u: f64, coefficients: Vec<f64>, strategy: &str) -> PyResult<f64> {
    let p = Potential::new(coefficients).map_err(to_py)?;
    let spec = KernelSpec::with_strategy(parse_strategy(strategy)?);
    epsmc::kernel_value(y, u, &p, &spec).map_err(to_py)
}

#[pyfunction]
fn langevin_step(u_now: f64, u_prev: f64, y: f64, coefficients: Vec<f64>) -> PyResult<f64> {
    let p = Potential::new(coefficients).map_err(to_py)?;
    Ok(epsmc::langevin_step(u_now, u_prev, y, &p))
}

/// Per-bin output of a run.
#[pyclass(get_all, frozen)]
struct Result {
    bin_centers: Vec<f64>,
    q: Vec<f64>,
    stderr: Vec<f64>,
    h0: Vec<u64>,
    h1: Vec<u64>,
    n_scale: Option<f64>,
}

#[pymethods]
impl Result {
    fn total(&self) -> f64 {
        self.q.iter().sum()
    }

    fn __repr__(&self) -> String {
        format!("Result(bins={}, total={:.6})", self.q.len(), self.total())
    }
}

/// A parsed TOML job configuration.
#[pyclass(frozen)]
struct Job {
    config: JobConfig,
}

impl Job {
    fn prepared(&self, seed: Option<u64>, strategy: Option<&str>) -> PyResult<Prepared> {
        let mut rc = self.config.run_config().map_err(to_py)?;
        if let Some(s) = seed {
            rc.seed = s;
        }
        if let Some(s) = strategy {
            rc.strategy = match s {
                "uniform" => SamplingStrategy::Uniform,
                "importance" => SamplingStrategy::Importance,
                other => return Err(PyValueError::new_err(format!("unknown sampling strategy {other:?}"))),
            };
        }
        Prepared::new(rc).map_err(to_py)
    }
}

#[pymethods]
impl Job {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Self { config: cli::parse_config(text).map_err(to_py)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { config: cli::load_config(&path).map_err(to_py)? })
    }

    /// The configuration with every default filled in, as JSON.
    fn echo(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.config).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Monte Carlo estimate of the final-bin masses.
    #[pyo3(signature = (seed=None, strategy=None, workers=None))]
    fn sample(
        &self,
        py: Python<'_>,
        seed: Option<u64>,
        strategy: Option<&str>,
        workers: Option<usize>,
    ) -> PyResult<Result> {
        let p = self.prepared(seed, strategy)?;
        let r = py.detach(|| run_with_workers(&p, workers));
        Ok(Result {
            bin_centers: r.bin_centers,
            q: r.q_hat,
            stderr: r.stderr,
            h0: r.h0,
            h1: r.h1,
            n_scale: Some(r.n_scale),
        })
    }

    /// Exact signed path sum on the same lattice.
    fn oracle(&self, py: Python<'_>) -> PyResult<Result> {
        let p = self.prepared(None, None)?;
        let q = py.detach(|| transfer_with_tables(&p.tables, &p.wigner)).map_err(to_py)?.q;
        Ok(deterministic(p.config.lattice.grid().points(), q))
    }

    /// Exact expectation of the sampler's estimate for the given strategy.
    #[pyo3(signature = (strategy=None))]
    fn expected(&self, strategy: Option<&str>) -> PyResult<Vec<f64>> {
        Ok(expected_q_hat(&self.prepared(None, strategy)?))
    }

    /// Predicted relative standard error and whether the run is feasible.
    fn cost(&self) -> PyResult<(f64, f64, bool)> {
        let c = sampler::estimate_cost(&self.prepared(None, None)?);
        Ok((c.n_scale, c.predicted_rel_se, c.feasible))
    }

    /// Crank-Nicolson bin masses after the lattice's total time.
    fn reference(&self, py: Python<'_>) -> PyResult<Result> {
        let rc = self.config.run_config().map_err(to_py)?;
        let params = self.config.reference.clone();
        let (bins, _) =
            py.detach(|| cli::reference_bins(&rc.lattice, &rc.potential, &rc.initial, &params)).map_err(to_py)?;
        Ok(deterministic(rc.lattice.grid().points(), bins))
    }

    /// Runs a subcommand as the command-line tool would, returning the files written.
    #[pyo3(signature = (subcommand, out, seed=None, force=false))]
    fn run(
        &self,
        py: Python<'_>,
        subcommand: &str,
        out: PathBuf,
        seed: Option<u64>,
        force: bool,
    ) -> PyResult<Vec<PathBuf>> {
        let sub = parse_subcommand(subcommand)?;
        let opts = RunOptions { seed, out: Some(out), force, ..RunOptions::default() };
        let output = py.detach(|| cli::run_job(&self.config, sub, &opts)).map_err(to_py)?;
        Ok(output.files)
    }
}

fn deterministic(bin_centers: Vec<f64>, q: Vec<f64>) -> Result {
    let n = q.len();
    Result { bin_centers, q, stderr: vec![0.0; n], h0: vec![0; n], h1: vec![0; n], n_scale: None }
}

#[pymodule]
#[pyo3(name = "epsmc")]
pub fn epsmc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(swap_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(valid_v_interval, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_chain, m)?)?;
    m.add_function(wrap_pyfunction!(airy_ai, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_value, m)?)?;
    m.add_function(wrap_pyfunction!(langevin_step, m)?)?;
    m.add_class::<Job>()?;
    m.add_class::<Result>()?;
    Ok(())
}
