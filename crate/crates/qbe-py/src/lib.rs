//! Python module `qbe_py`. Reports come back as JSON strings; parse them with
//! `json.loads`.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qbe::artifacts;
use qbe::grid::{GridSpec, RadialGrid};
use qbe::scenario::{Overrides, Scenario};
use qbe::{CollisionOperator, DistributionState, ParamInputs, PhysicalParams, QbeError};

fn to_py(e: QbeError) -> PyErr {
    match e {
        QbeError::Io(e) => PyIOError::new_err(e.to_string()),
        QbeError::Config { .. } | QbeError::Domain(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn params(m: f64, g: f64, n_c: f64, kappa3: f64) -> PyResult<PhysicalParams> {
    PhysicalParams::new(&ParamInputs {
        m,
        g,
        n_c,
        kappa3,
        ..ParamInputs::default()
    })
    .map_err(to_py)
}

fn load(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>, refine: Option<usize>) -> PyResult<Scenario> {
    let mut s = Scenario::load(&config).map_err(to_py)?;
    s.apply(&Overrides { out, seed, refine }).map_err(to_py)?;
    Ok(s)
}

/// Derived constants `{kappa1, kappa2, p0, gamma, ...}` as JSON.
#[pyfunction]
#[pyo3(signature = (m=0.5, g=1.0, n_c=1.0, kappa3=1.0))]
fn derived(m: f64, g: f64, n_c: f64, kappa3: f64) -> PyResult<String> {
    json(&artifacts::Derived::from(&params(m, g, n_c, kappa3)?))
}

/// Dispersion `E(u)` at each momentum.
#[pyfunction]
#[pyo3(signature = (u, m=0.5, g=1.0, n_c=1.0))]
fn energy(u: Vec<f64>, m: f64, g: f64, n_c: f64) -> PyResult<Vec<f64>> {
    let p = params(m, g, n_c, 1.0)?;
    u.iter().map(|&x| qbe::physics::energy(x, &p).map_err(to_py)).collect()
}

/// `(nodes, Q[f])` on a lattice of `len(values)` nodes up to `u_max`.
#[pyfunction]
#[pyo3(signature = (values, u_max, m=0.5, g=1.0, n_c=1.0, kappa3=1.0))]
fn collision(
    py: Python<'_>,
    values: Vec<f64>,
    u_max: f64,
    m: f64,
    g: f64,
    n_c: f64,
    kappa3: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let p = params(m, g, n_c, kappa3)?;
    let grid = Arc::new(RadialGrid::build(&GridSpec::lattice(values.len(), u_max), &p).map_err(to_py)?);
    let state = DistributionState::new(grid.clone(), values).map_err(to_py)?;
    let op = CollisionOperator::new(&p, grid.clone());
    let q = py.detach(|| op.q_apply(&state)).map_err(to_py)?.q;
    Ok((grid.nodes.clone(), q))
}

/// Dry-run report for a scenario file.
#[pyfunction]
#[pyo3(signature = (config, seed=None, refine=None))]
fn validate(config: PathBuf, seed: Option<u64>, refine: Option<usize>) -> PyResult<String> {
    let s = load(config, None, seed, refine)?;
    json(&artifacts::validate(&s).map_err(to_py)?)
}

/// Runs a scenario, writes artifacts into `out`, and returns `run_meta` as JSON.
/// Aborted runs raise after their partial artifacts are written.
#[pyfunction]
#[pyo3(signature = (config, out, seed=None, refine=None))]
fn run(py: Python<'_>, config: PathBuf, out: PathBuf, seed: Option<u64>, refine: Option<usize>) -> PyResult<String> {
    let s = load(config, Some(out.clone()), seed, refine)?;
    let o = py.detach(|| artifacts::run(&s, &out)).map_err(to_py)?;
    if let Some(why) = &o.record.abort {
        return Err(PyRuntimeError::new_err(format!("run aborted: {why}")));
    }
    json(&o.meta)
}

/// Recomputes `audits.json` in a run directory and returns it.
#[pyfunction]
fn audit(py: Python<'_>, dir: PathBuf) -> PyResult<String> {
    json(&py.detach(|| artifacts::audit_dir(&dir)).map_err(to_py)?)
}

#[pymodule]
fn qbe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(derived, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(collision, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    Ok(())
}
