//! Python bindings: ground-state solves, branch sweeps and their analyses, the
//! asymptotic models and the energy landscape. Reports come back as plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};
use serde::Serialize;
use serde_json::Value;

use dpnls::branch::{self, GridSpec};
use dpnls::linearized::{assemble, eigenvalues as op_eigenvalues, mass_derivative_with, GridOptions, Which};
use dpnls::shooting::{diagnostics, solve_ground_state, ShootControls};
use dpnls::{asymptotics, nonlinearity, variational, ProblemParams, RadialProfile};

fn py_err(e: dpnls::Error) -> PyErr {
    match e {
        dpnls::Error::Parameter(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(a) => {
            let list = PyList::empty(py);
            for x in a {
                list.append(json_to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(m) => {
            let dict = PyDict::new(py);
            for (k, x) in m {
                dict.set_item(k, json_to_py(py, x)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

/// μ*, β*, x* and the regimes of (p, q, d).
#[pyfunction]
fn constants<'py>(py: Python<'py>, p: f64, q: f64, d: u32) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &nonlinearity::constants(p, q, d).map_err(py_err)?)
}

/// (H1), (H2) and existence on the default λ grid.
#[pyfunction]
fn check_hypotheses<'py>(py: Python<'py>, p: f64, q: f64, d: u32, mu: f64) -> PyResult<Bound<'py, PyAny>> {
    let prm = ProblemParams::double_power_relaxed(p, q, d, mu).map_err(py_err)?;
    to_py(py, &nonlinearity::check_hypotheses(&prm, &nonlinearity::default_lambda_grid()).map_err(py_err)?)
}

/// A solved radial ground state.
#[pyclass(name = "Profile", frozen)]
struct PyProfile {
    inner: RadialProfile,
}

#[pymethods]
impl PyProfile {
    #[getter]
    fn y0(&self) -> f64 {
        self.inner.y0
    }

    #[getter]
    fn r(&self) -> Vec<f64> {
        self.inner.grid.clone()
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.u.clone()
    }

    #[getter]
    fn du(&self) -> Vec<f64> {
        self.inner.du.clone()
    }

    /// u at any radius, including the analytic tail.
    fn u_at(&self, r: f64) -> f64 {
        self.inner.u_at(r)
    }

    fn integrals<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.integrals())
    }

    fn diagnostics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &diagnostics(&self.inner))
    }

    /// M', M'' and the two lowest radial eigenvalues from the linearized operator.
    fn mass_derivative<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &mass_derivative_with(&self.inner, &GridOptions::default()).map_err(py_err)?)
    }

    /// Lowest k eigenvalues of the linearized operator in angular sector l.
    #[pyo3(signature = (k = 2, l = 0))]
    fn eigenvalues(&self, k: usize, l: u32) -> PyResult<Vec<f64>> {
        let op = assemble(&self.inner, l, Which::LMu).map_err(py_err)?;
        op_eigenvalues(&op, k).map_err(py_err)
    }

    fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Ground state of the double-power equation at 0 < μ < μ*.
#[pyfunction]
fn solve(p: f64, q: f64, d: u32, mu: f64) -> PyResult<PyProfile> {
    let prm = ProblemParams::double_power(p, q, d, mu).map_err(py_err)?;
    let inner = solve_ground_state(&prm, &ShootControls::default()).map_err(py_err)?;
    Ok(PyProfile { inner })
}

/// Ground state Q of ΔQ + Q^q - Q = 0.
#[pyfunction]
fn nls_q(q: f64, d: u32) -> PyResult<PyProfile> {
    let prm = ProblemParams::single_power_nls(q, d).map_err(py_err)?;
    let inner = solve_ground_state(&prm, &ShootControls::default()).map_err(py_err)?;
    Ok(PyProfile { inner })
}

/// A sampled solution branch.
#[pyclass(name = "BranchCurve", frozen)]
struct PyCurve {
    inner: branch::BranchCurve,
}

#[pymethods]
impl PyCurve {
    fn __len__(&self) -> usize {
        self.inner.points.len()
    }

    #[getter]
    fn mu_star(&self) -> f64 {
        self.inner.mu_star()
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.mu).collect()
    }

    #[getter]
    fn mass(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.mass).collect()
    }

    #[getter]
    fn mass_derivative(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.mp_lin).collect()
    }

    #[getter]
    fn energy(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.energy).collect()
    }

    /// Every point as a dict.
    fn points<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.points)
    }

    fn analyze<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &branch::analyze(&self.inner).map_err(py_err)?)
    }

    /// Solutions of M(μ) = λ as (μ, "Stable" | "Unstable") pairs.
    fn invert_mass(&self, lam: f64) -> PyResult<Vec<(f64, String)>> {
        let inv = branch::invert_mass(&self.inner, lam).map_err(py_err)?;
        Ok(inv.solutions.iter().map(|(mu, s)| (*mu, format!("{s:?}"))).collect())
    }

    /// Endpoint-law comparison against the small- and large-μ models.
    fn compare<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let (p, q, d) = (self.inner.p, self.inner.q, self.inner.d);
        let small = asymptotics::small_mu_model(p, q, d).map_err(py_err)?;
        let large = asymptotics::large_mu_model(p, q, d).map_err(py_err)?;
        to_py(py, &asymptotics::compare(&self.inner, &small, &large).map_err(py_err)?)
    }

    /// I(λ) rows on a geometric λ grid, plus λ_c and the regime.
    #[pyo3(signature = (n = 200))]
    fn landscape<'py>(&self, py: Python<'py>, n: usize) -> PyResult<Bound<'py, PyAny>> {
        let land = variational::energy_landscape(&self.inner).map_err(py_err)?;
        let values: Vec<variational::IValue> = variational::lambda_grid(&land, n.max(3))
            .into_iter()
            .map(|l| variational::i_of_lambda(&land, l))
            .collect::<Result<_, _>>()
            .map_err(py_err)?;
        let out = serde_json::json!({
            "lambda_c": land.lambda_c,
            "lambda_c_conditional": land.lambda_c_conditional,
            "mass_regime": land.mass_regime,
            "c_gn": land.c_gn,
            "values": values,
        });
        json_to_py(py, &out)
    }

    fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Sweep μ over a logit-uniform grid of μ/μ* in [x_lo, x_hi].
#[pyfunction]
#[pyo3(signature = (p, q, d, points = 120, x_lo = 1e-3, x_hi = 0.995))]
fn sweep(py: Python<'_>, p: f64, q: f64, d: u32, points: usize, x_lo: f64, x_hi: f64) -> PyResult<PyCurve> {
    let spec = GridSpec { n_points: points, x_lo, x_hi };
    let inner = py.detach(|| branch::sweep(p, q, d, &spec)).map_err(py_err)?;
    Ok(PyCurve { inner })
}

#[pyfunction]
fn small_mu_model<'py>(py: Python<'py>, p: f64, q: f64, d: u32) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &asymptotics::small_mu_model(p, q, d).map_err(py_err)?)
}

#[pyfunction]
fn large_mu_model<'py>(py: Python<'py>, p: f64, q: f64, d: u32) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &asymptotics::large_mu_model(p, q, d).map_err(py_err)?)
}

#[pyfunction]
fn gn_constant(p: f64, q: f64, d: u32, lambda_c: f64) -> PyResult<f64> {
    variational::gn_constant(p, q, d, lambda_c).map_err(py_err)
}

#[pymodule]
fn dpnls_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProfile>()?;
    m.add_class::<PyCurve>()?;
    m.add_function(wrap_pyfunction!(constants, m)?)?;
    m.add_function(wrap_pyfunction!(check_hypotheses, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(nls_q, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(small_mu_model, m)?)?;
    m.add_function(wrap_pyfunction!(large_mu_model, m)?)?;
    m.add_function(wrap_pyfunction!(gn_constant, m)?)?;
    Ok(())
}
