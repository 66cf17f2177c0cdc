//! Python bindings: run scenarios from config text and evaluate the
//! diagnostic functionals on sampled fields.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pilotwave::check::run_checks;
use pilotwave::config::{parse_config, to_config_string};
use pilotwave::experiments::{reversal_experiment, run_scenario, ExperimentKind, RunError, ScenarioConfig};
use pilotwave::monitors::{self, MonitorRecord};
use pilotwave::numerics::{Boundary, RealField, SpatialGrid};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn field(values: Vec<f64>, x_min: f64, x_max: f64, boundary: &str) -> PyResult<RealField> {
    let boundary: Boundary = boundary.parse().map_err(value_error)?;
    let grid = SpatialGrid::new(values.len(), x_min, x_max, boundary).map_err(value_error)?;
    RealField::new(grid, values).map_err(value_error)
}

/// Monitor records as a dict of equal-length columns.
fn columns<'py>(py: Python<'py>, records: &[MonitorRecord]) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let col = |f: fn(&MonitorRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    d.set_item("t", col(|r| r.time))?;
    d.set_item("h_q", col(|r| r.h_q))?;
    d.set_item("norm", col(|r| r.norm))?;
    d.set_item("l1_dist", col(|r| r.l1_dist))?;
    d.set_item("dh_dt_analytic", col(|r| r.dh_dt_analytic))?;
    d.set_item("dh_dt_numeric", col(|r| r.dh_dt_numeric))?;
    d.set_item("continuity_residual", col(|r| r.continuity_residual))?;
    d.set_item("floored_points", records.iter().map(|r| r.floored_points).collect::<Vec<_>>())?;
    if let Some(first) = records.first() {
        for &(cells, _) in &first.h_bar {
            let trace: Vec<f64> = records.iter().map(|r| r.h_bar_at(cells).unwrap_or(f64::NAN)).collect();
            d.set_item(format!("h_bar_cells_{cells}"), trace)?;
        }
    }
    Ok(d)
}

/// Resolved config text of the standard scenario.
#[pyfunction]
fn standard_config() -> String {
    to_config_string(&ScenarioConfig::standard())
}

/// Runs the scenario described by `config` (flat `section.key = value`
/// lines) and returns its monitor columns. Reversal runs add
/// `backward` columns and the two retrace errors.
#[pyfunction]
fn run<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse_config(config).map_err(value_error)?;
    let failure = |e: RunError| match e {
        RunError::Invalid(e) => value_error(e),
        aborted => PyRuntimeError::new_err(aborted.to_string()),
    };
    let out = PyDict::new(py);
    if cfg.kind == ExperimentKind::Reversal {
        let report = py.detach(|| reversal_experiment(&cfg, cfg.t_reverse)).map_err(failure)?;
        out.set_item("monitors", columns(py, &report.forward_records)?)?;
        out.set_item("backward", columns(py, &report.backward_records)?)?;
        out.set_item("retrace_l2_error", report.retrace_l2_error)?;
        out.set_item("retrace_rho_error", report.retrace_rho_error)?;
    } else {
        let output = py.detach(|| run_scenario(&cfg)).map_err(failure)?;
        out.set_item("monitors", columns(py, &output.records)?)?;
        out.set_item("psi_sq", output.final_wave.psi_sq().into_values())?;
    }
    out.set_item("config", to_config_string(&cfg))?;
    Ok(out)
}

/// `H_q` of two sampled densities on a uniform grid.
#[pyfunction]
#[pyo3(signature = (rho, psi_sq, x_min = 0.0, x_max = 1.0, boundary = "box"))]
fn h_function(rho: Vec<f64>, psi_sq: Vec<f64>, x_min: f64, x_max: f64, boundary: &str) -> PyResult<f64> {
    let rho = field(rho, x_min, x_max, boundary)?;
    let psi_sq = field(psi_sq, x_min, x_max, boundary)?;
    monitors::h_function(&rho, &psi_sq).map_err(value_error)
}

/// Coarse-grained `H̄` over `cells` equal cells.
#[pyfunction]
#[pyo3(signature = (rho, psi_sq, cells, x_min = 0.0, x_max = 1.0, boundary = "box"))]
fn h_bar(rho: Vec<f64>, psi_sq: Vec<f64>, cells: usize, x_min: f64, x_max: f64, boundary: &str) -> PyResult<f64> {
    let rho = field(rho, x_min, x_max, boundary)?;
    let psi_sq = field(psi_sq, x_min, x_max, boundary)?;
    monitors::h_bar(&rho, &psi_sq, cells).map_err(value_error)
}

/// `(name, passed, worst, tolerance)` for every built-in oracle.
#[pyfunction]
#[pyo3(signature = (seed = 2024))]
fn check(py: Python<'_>, seed: u64) -> PyResult<Vec<(String, bool, f64, f64)>> {
    let outcomes = py.detach(|| run_checks(seed)).map_err(value_error)?;
    Ok(outcomes
        .into_iter()
        .map(|o| (o.name.to_string(), o.passed, o.worst, o.tolerance))
        .collect())
}

#[pymodule]
fn pilotwave_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(standard_config, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(h_function, m)?)?;
    m.add_function(wrap_pyfunction!(h_bar, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
