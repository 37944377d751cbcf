//! Python bindings. Fields cross the boundary as flat row-major lists of
//! floats; the grid is rebuilt from the list length, `dim` and `period`.

use std::f64::consts::TAU;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use fraclr::bilinear::apply_direct;
use fraclr::cone::lemma12_scan;
use fraclr::family::{generate, FamilySpec};
use fraclr::harness::{rows_to_csv, run_sweep, SweepPlan, DEFAULT_PLAN};
use fraclr::leibniz::{commutator as commutator_field, remainder_kpv as kpv, remainder_second_order as second_order};
use fraclr::spectral;
use fraclr::symbol::{SymbolKind, SymbolSpec};
use fraclr::{GridSpec, LpFamily, RealField};

fn py_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn grid_for(len: usize, dim: usize, period: f64) -> fraclr::Result<GridSpec> {
    let n = match dim {
        1 => len,
        2 => (len as f64).sqrt().round() as usize,
        _ => 0,
    };
    if n.pow(dim as u32) != len {
        return Err(fraclr::Error::InvalidParameter {
            name: "values",
            reason: format!("{len} values do not form a {dim}-dimensional square grid"),
        });
    }
    GridSpec::new(dim, n, period)
}

fn field(values: Vec<f64>, dim: usize, period: f64) -> fraclr::Result<RealField> {
    RealField::new(grid_for(values.len(), dim, period)?, values)
}

fn pair(f: Vec<f64>, g: Vec<f64>, dim: usize, period: f64) -> fraclr::Result<(RealField, RealField)> {
    let (f, g) = (field(f, dim, period)?, field(g, dim, period)?);
    f.check_same_grid(&g)?;
    Ok((f, g))
}

fn family(grid: GridSpec, j_min: i32, j_max: Option<i32>) -> fraclr::Result<LpFamily> {
    LpFamily::new(grid, j_min, j_max.unwrap_or_else(|| LpFamily::max_band(&grid)))
}

fn symbol_kind(name: &str, s: f64, theta: f64, m: usize) -> fraclr::Result<SymbolKind> {
    Ok(match name {
        "sumriesz" => SymbolKind::SumRiesz { s },
        "shifted-riesz" => SymbolKind::ShiftedRiesz { s, theta },
        "theta-deriv" => SymbolKind::ThetaDeriv { s, theta, m },
        "kpv-remainder" => SymbolKind::KpvRemainder { s },
        "second-order-remainder" => SymbolKind::SecondOrderRemainder { s },
        other => return Err(fraclr::Error::UnsupportedSymbol(format!("unknown symbol `{other}`"))),
    })
}

/// `D^s f` for real `s ≥ 0`.
#[pyfunction]
#[pyo3(signature = (values, s, period = TAU, dim = 1))]
fn riesz_potential(values: Vec<f64>, s: f64, period: f64, dim: usize) -> PyResult<Vec<f64>> {
    let f = field(values, dim, period).map_err(py_err)?;
    Ok(spectral::riesz_potential(&f, s).into_values())
}

/// `(∫ |f|^p)^{1/p}` over the torus.
#[pyfunction]
#[pyo3(signature = (values, p, period = TAU, dim = 1))]
fn lp_norm(values: Vec<f64>, p: f64, period: f64, dim: usize) -> PyResult<f64> {
    let f = field(values, dim, period).map_err(py_err)?;
    spectral::lp_norm(&f, p).map_err(py_err)
}

/// `P_j f`, or `P_{≤j} f` with `leq=True`.
#[pyfunction]
#[pyo3(signature = (values, j, leq = false, j_min = 0, j_max = None, period = TAU, dim = 1))]
fn project(values: Vec<f64>, j: i32, leq: bool, j_min: i32, j_max: Option<i32>, period: f64, dim: usize) -> PyResult<Vec<f64>> {
    let f = field(values, dim, period).map_err(py_err)?;
    let fam = family(*f.grid(), j_min, j_max).map_err(py_err)?;
    let out = if leq { fam.project_leq(&f, j) } else { fam.project(&f, j) };
    Ok(out.map_err(py_err)?.into_values())
}

/// `D^s(fg) - f D^s g - g D^s f`.
#[pyfunction]
#[pyo3(signature = (f, g, s, period = TAU, dim = 1))]
fn remainder_kpv(f: Vec<f64>, g: Vec<f64>, s: f64, period: f64, dim: usize) -> PyResult<Vec<f64>> {
    let (f, g) = pair(f, g, dim, period).map_err(py_err)?;
    Ok(kpv(&f, &g, s).map_err(py_err)?.into_values())
}

/// `D^s(fg) - f D^s g - g D^s f + s D^{s-2}(∇f·∇g)`, `s ≥ 2`.
#[pyfunction]
#[pyo3(signature = (f, g, s, period = TAU, dim = 1))]
fn remainder_second_order(f: Vec<f64>, g: Vec<f64>, s: f64, period: f64, dim: usize) -> PyResult<Vec<f64>> {
    let (f, g) = pair(f, g, dim, period).map_err(py_err)?;
    Ok(second_order(&f, &g, s).map_err(py_err)?.into_values())
}

/// `D^s(fg) - f D^s g`.
#[pyfunction]
#[pyo3(signature = (f, g, s, period = TAU, dim = 1))]
fn commutator(f: Vec<f64>, g: Vec<f64>, s: f64, period: f64, dim: usize) -> PyResult<Vec<f64>> {
    let (f, g) = pair(f, g, dim, period).map_err(py_err)?;
    Ok(commutator_field(&f, &g, s).map_err(py_err)?.into_values())
}

/// Direct double sum of a named symbol, optionally localized
/// (`"low-high"` or `"diagonal"`).
#[pyfunction]
#[pyo3(signature = (f, g, symbol, s, theta = 0.0, m = 0, localization = None, period = TAU, dim = 1))]
#[allow(clippy::too_many_arguments)]
fn bilinear_direct(
    f: Vec<f64>,
    g: Vec<f64>,
    symbol: &str,
    s: f64,
    theta: f64,
    m: usize,
    localization: Option<&str>,
    period: f64,
    dim: usize,
) -> PyResult<Vec<f64>> {
    let (f, g) = pair(f, g, dim, period).map_err(py_err)?;
    let kind = symbol_kind(symbol, s, theta, m).map_err(py_err)?;
    let fam = || family(*f.grid(), 0, None).map(Arc::new).map_err(py_err);
    let sym = match localization {
        None => SymbolSpec::new(kind),
        Some("low-high") => SymbolSpec::low_high(kind, fam()?),
        Some("diagonal") => SymbolSpec::diagonal(kind, fam()?),
        Some(other) => return Err(py_err(format!("unknown localization `{other}`"))),
    };
    Ok(apply_direct(&sym, &f, &g).map_err(py_err)?.into_values())
}

/// The `(f, g)` test pair for a family spec given as JSON.
#[pyfunction]
#[pyo3(signature = (spec_json, n = 256, period = TAU, j_min = 0, j_max = None, dim = 1))]
fn generate_pair(spec_json: &str, n: usize, period: f64, j_min: i32, j_max: Option<i32>, dim: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let spec: FamilySpec = serde_json::from_str(spec_json).map_err(py_err)?;
    let grid = GridSpec::new(dim, n, period).map_err(py_err)?;
    let out = generate(&spec, &family(grid, j_min, j_max).map_err(py_err)?).map_err(py_err)?;
    Ok((out.f.into_values(), out.g.into_values()))
}

/// The bundled desk-scale plan as JSON text.
#[pyfunction]
fn default_plan() -> &'static str {
    DEFAULT_PLAN
}

/// Runs a plan given as JSON; returns `(pass, csv, verdict_json)`.
#[pyfunction]
fn run_plan(py: Python<'_>, plan_json: &str) -> PyResult<(bool, String, String)> {
    let plan = SweepPlan::from_json(plan_json).map_err(py_err)?;
    let outcome = py.detach(|| run_sweep(&plan)).map_err(py_err)?;
    let verdict = serde_json::to_string_pretty(&outcome.verdict).map_err(py_err)?;
    Ok((outcome.verdict.pass, rows_to_csv(&outcome.rows), verdict))
}

/// Cone-bound scan report as JSON text.
#[pyfunction]
#[pyo3(signature = (s_list, order = 4, dim = 1, spread_tolerance = 1e-9))]
fn scan_symbols(s_list: Vec<f64>, order: usize, dim: usize, spread_tolerance: f64) -> PyResult<String> {
    let report = lemma12_scan(dim, &s_list, order, spread_tolerance).map_err(py_err)?;
    serde_json::to_string(&report).map_err(py_err)
}

#[pymodule]
fn pyfraclr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(riesz_potential, m)?)?;
    m.add_function(wrap_pyfunction!(lp_norm, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(remainder_kpv, m)?)?;
    m.add_function(wrap_pyfunction!(remainder_second_order, m)?)?;
    m.add_function(wrap_pyfunction!(commutator, m)?)?;
    m.add_function(wrap_pyfunction!(bilinear_direct, m)?)?;
    m.add_function(wrap_pyfunction!(generate_pair, m)?)?;
    m.add_function(wrap_pyfunction!(default_plan, m)?)?;
    m.add_function(wrap_pyfunction!(run_plan, m)?)?;
    m.add_function(wrap_pyfunction!(scan_symbols, m)?)?;
    Ok(())
}
