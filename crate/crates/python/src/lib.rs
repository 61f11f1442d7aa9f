//! Python bindings: `import pyparasphere`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use parasphere::export::{self, obj_string, ExportError};
use parasphere::skgeom::{self, GeomError, PointData};
use parasphere::verify::{ChartWindow, OracleConfig, Sampling, SuiteConfig, Tolerances, VerifyError};
use parasphere::{cjet, expr};

create_exception!(pyparasphere, DegenerateError, PyArithmeticError);

fn geom_err(e: GeomError) -> PyErr {
    match e {
        GeomError::DegenerateMetric { .. } => DegenerateError::new_err(e.to_string()),
        GeomError::Eval(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn verify_err(e: VerifyError) -> PyErr {
    match e {
        VerifyError::AllPointsDegenerate { .. } => DegenerateError::new_err(e.to_string()),
        VerifyError::Geometry { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn export_err(e: ExportError) -> PyErr {
    match e {
        ExportError::Window(v) => verify_err(v),
        ExportError::AllPointsDegenerate { .. } => DegenerateError::new_err(e.to_string()),
        ExportError::Io(_) | ExportError::Csv(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// A parsed holomorphic expression in `z1..zn`.
#[pyclass(name = "Expr", module = "pyparasphere", frozen)]
struct PyExpr {
    inner: expr::Expr,
}

#[pymethods]
impl PyExpr {
    #[new]
    fn new(source: &str, n: usize) -> PyResult<Self> {
        expr::parse(source, n).map(|inner| PyExpr { inner }).map_err(value_err)
    }

    #[getter]
    fn arity(&self) -> usize {
        self.inner.arity()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr({:?}, {})", self.inner.to_string(), self.inner.arity())
    }

    fn __call__(&self, z: Vec<Complex64>) -> PyResult<Complex64> {
        self.inner.eval_complex(&z).map_err(value_err)
    }

    /// Value, gradient, Hessian and third derivatives at `z`.
    fn jet<'py>(&self, py: Python<'py>, z: Vec<Complex64>) -> PyResult<Bound<'py, PyDict>> {
        let j = cjet::jet_eval(&self.inner, &z).map_err(value_err)?;
        let n = j.arity();
        let hess: Vec<Vec<Complex64>> = (0..n).map(|a| (0..n).map(|b| j.hess(a, b)).collect()).collect();
        let third: Vec<Vec<Vec<Complex64>>> = (0..n)
            .map(|a| (0..n).map(|b| (0..n).map(|c| j.third(a, b, c)).collect()).collect())
            .collect();
        let d = PyDict::new(py);
        d.set_item("value", j.val)?;
        d.set_item("grad", j.grad.clone())?;
        d.set_item("hess", hess)?;
        d.set_item("third", third)?;
        Ok(d)
    }
}

fn point(e: &PyExpr, z: &[Complex64]) -> PyResult<PointData> {
    skgeom::eval_point(&e.inner, z).map_err(value_err)
}

/// Chart data and immersion at `z`.
#[pyfunction]
fn eval_point<'py>(py: Python<'py>, expr: &PyExpr, z: Vec<Complex64>) -> PyResult<Bound<'py, PyDict>> {
    let p = point(expr, &z)?;
    let d = PyDict::new(py);
    d.set_item("z", p.z.clone())?;
    d.set_item("w", p.w.clone())?;
    d.set_item("value", p.value)?;
    d.set_item("x", p.x.clone())?;
    d.set_item("u", p.u.clone())?;
    d.set_item("y", p.y.clone())?;
    d.set_item("v", p.v.clone())?;
    d.set_item("tau", rows(&p.tau))?;
    d.set_item("f", p.f)?;
    d.set_item("imm", p.imm.clone())?;
    Ok(d)
}

#[pyfunction]
fn nondegeneracy<'py>(py: Python<'py>, expr: &PyExpr, z: Vec<Complex64>) -> PyResult<Bound<'py, PyDict>> {
    let nd = skgeom::nondegeneracy(&point(expr, &z)?.tau);
    let d = PyDict::new(py);
    d.set_item("ok", nd.ok)?;
    d.set_item("min_sv", nd.min_sv)?;
    d.set_item("threshold", nd.threshold)?;
    d.set_item("sig_imtau", nd.sig_imtau)?;
    Ok(d)
}

/// Metric, Hessian, inverse metric and Kaehler form in the affine frame.
#[pyfunction]
fn metric_bundle<'py>(py: Python<'py>, expr: &PyExpr, z: Vec<Complex64>) -> PyResult<Bound<'py, PyDict>> {
    let b = skgeom::metric_bundle(&point(expr, &z)?).map_err(geom_err)?;
    let d = PyDict::new(py);
    d.set_item("g_xu", rows(&b.g_xu))?;
    d.set_item("g_xy", rows(&b.g_xy))?;
    d.set_item("gv_xy", rows(&b.gv_xy))?;
    d.set_item("ginv_xy", rows(&b.ginv_xy))?;
    d.set_item("omega_xy", rows(&b.omega_xy))?;
    d.set_item("jac", rows(&b.jac))?;
    d.set_item("sig", b.sig)?;
    Ok(d)
}

#[pyfunction]
fn lemma_residuals(expr: &PyExpr, z: Vec<Complex64>) -> PyResult<[f64; 6]> {
    let r = skgeom::lemma_residuals(&point(expr, &z)?).map_err(geom_err)?;
    Ok(r.as_array())
}

#[pyfunction]
fn volume(expr: &PyExpr, z: Vec<Complex64>) -> PyResult<f64> {
    Ok(skgeom::volume_check(&point(expr, &z)?).map_err(geom_err)?.det_gxy)
}

fn window(n: usize, lo: Vec<f64>, hi: Vec<f64>, grid: Option<Vec<usize>>, samples: Option<usize>, seed: u64) -> ChartWindow {
    let sampling = match samples {
        Some(count) => Sampling::QuasiRandom { count, seed },
        None => Sampling::UniformGrid {
            per_axis: grid.unwrap_or_else(|| vec![11]),
        },
    };
    ChartWindow { n, lo, hi, sampling }
}

/// Runs the verification suite and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (expr, lo, hi, grid=None, samples=None, seed=0, tol_algebraic=1e-9, tol_oracle=1e-5, h=1e-3, h2=None, oracle_points=25, jet=false))]
#[allow(clippy::too_many_arguments)]
fn verify<'py>(
    py: Python<'py>,
    expr: &PyExpr,
    lo: Vec<f64>,
    hi: Vec<f64>,
    grid: Option<Vec<usize>>,
    samples: Option<usize>,
    seed: u64,
    tol_algebraic: f64,
    tol_oracle: f64,
    h: f64,
    h2: Option<f64>,
    oracle_points: usize,
    jet: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let w = window(expr.inner.arity(), lo, hi, grid, samples, seed);
    let cfg = SuiteConfig {
        tolerances: Tolerances {
            algebraic: tol_algebraic,
            oracle: tol_oracle,
        },
        oracle: OracleConfig {
            steps: [h, h2.unwrap_or(h / 2.0)],
            points: oracle_points,
            jet,
        },
    };
    let report = py
        .detach(|| parasphere::run_suite(&expr.inner, &w, &cfg))
        .map_err(verify_err)?;
    PyModule::import(py, "json")?.call_method1("loads", (report.to_json(),))
}

/// Triangulated immersed surface of a one-variable expression.
#[pyfunction]
#[pyo3(signature = (expr, lo, hi, grid=None))]
fn build_mesh<'py>(
    py: Python<'py>,
    expr: &PyExpr,
    lo: Vec<f64>,
    hi: Vec<f64>,
    grid: Option<Vec<usize>>,
) -> PyResult<Bound<'py, PyDict>> {
    let w = window(expr.inner.arity(), lo, hi, grid, None, 0);
    let m = export::build_mesh(&expr.inner, &w).map_err(export_err)?;
    let d = PyDict::new(py);
    d.set_item("vertices", m.vertices.clone())?;
    d.set_item("faces", m.faces.clone())?;
    d.set_item("dropped_cells", m.dropped_cells)?;
    d.set_item("degenerate", m.attributes.iter().map(|a| a.degenerate).collect::<Vec<_>>())?;
    d.set_item("obj", obj_string(&m))?;
    Ok(d)
}

#[pymodule]
fn pyparasphere(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add("DegenerateError", m.py().get_type::<DegenerateError>())?;
    m.add_function(wrap_pyfunction!(eval_point, m)?)?;
    m.add_function(wrap_pyfunction!(nondegeneracy, m)?)?;
    m.add_function(wrap_pyfunction!(metric_bundle, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_residuals, m)?)?;
    m.add_function(wrap_pyfunction!(volume, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(build_mesh, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_round_trip() {
        Python::initialize();
        Python::attach(|py| {
            let m = PyModule::new(py, "pyparasphere").unwrap();
            pyparasphere(&m).unwrap();
            let e = PyExpr::new("z1^3/6", 1).unwrap();
            let z = vec![Complex64::new(0.3, 0.7)];
            let d = eval_point(py, &e, z.clone()).unwrap();
            let imm: Vec<f64> = d.get_item("imm").unwrap().unwrap().extract().unwrap();
            assert!((imm[1] + 0.2).abs() < 1e-14);
            assert!((volume(&e, z).unwrap() - 4.0).abs() < 1e-12);
            let flat = PyExpr::new("z1^2/2", 1).unwrap();
            let err = volume(&flat, vec![Complex64::new(0.0, 1.0)]).unwrap_err();
            assert!(err.is_instance_of::<DegenerateError>(py));
            assert!(PyExpr::new("z1 +", 1).is_err());
        });
    }
}
