//! Python module `quadsurf`.
//!
//! Complex numbers cross the boundary as Python `complex`; structured
//! results come back as the same dictionaries the command line writes.
//! Input errors raise `ValueError`, numerical failures `ArithmeticError`.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use quadsurf::cellular::{
    cycles_max_entry, generate_origami, generate_rhombic_patch, generate_square_torus, generate_trihex_torus,
    permutation_from_cycles, PatchShape, PatchStyle,
};
use quadsurf::critical::{self, check_critical, CriticalMap, GreenParams, Monomials};
use quadsurf::integrable::{self, BacklundKind};
use quadsurf::periods::{compute_periods, periods_json};
use quadsurf::verify::{self, Suite};
use quadsurf::{Error, QuadComplex, C64};

fn err(e: Error) -> PyErr {
    if e.is_input() {
        PyValueError::new_err(e.to_string())
    } else {
        PyArithmeticError::new_err(e.to_string())
    }
}

fn to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

/// A quad-graph surface or patch.
#[pyclass(name = "Complex", module = "quadsurf", skip_from_py_object)]
pub struct PyComplex {
    inner: QuadComplex,
}

impl PyComplex {
    fn critical(&self) -> PyResult<CriticalMap> {
        check_critical(&self.inner).map_err(err)
    }

    fn values(&self, f: Vec<C64>) -> PyResult<Vec<C64>> {
        if f.len() != self.inner.n_vertices() {
            return Err(PyValueError::new_err(format!(
                "expected {} vertex values, got {}",
                self.inner.n_vertices(),
                f.len()
            )));
        }
        Ok(f)
    }
}

fn kind(name: &str) -> PyResult<BacklundKind> {
    match name {
        "linear" => Ok(BacklundKind::Linear),
        "quadratic" => Ok(BacklundKind::Quadratic),
        _ => Err(PyValueError::new_err(format!("unknown kind '{name}'"))),
    }
}

#[pymethods]
impl PyComplex {
    #[staticmethod]
    fn square_torus(p: usize, q: usize, theta: f64) -> PyResult<Self> {
        Ok(PyComplex { inner: generate_square_torus(p, q, theta).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (rows = 2, cols = 3, rhos = None))]
    fn trihex_torus(rows: usize, cols: usize, rhos: Option<[f64; 3]>) -> PyResult<Self> {
        let r = rhos.unwrap_or([1.0 / 3f64.sqrt(); 3]);
        Ok(PyComplex { inner: generate_trihex_torus(rows, cols, r).map_err(err)? })
    }

    /// Square-tiled surface from 1-based cycle strings such as `"1 2 3 4"`.
    #[staticmethod]
    #[pyo3(signature = (h, v, rho = 1.0))]
    fn origami(h: &str, v: &str, rho: f64) -> PyResult<Self> {
        let n = cycles_max_entry(h).max(cycles_max_entry(v));
        let hp = permutation_from_cycles(h, n).map_err(err)?;
        let vp = permutation_from_cycles(v, n).map_err(err)?;
        Ok(PyComplex { inner: generate_origami(&hp, &vp, rho).map_err(err)? })
    }

    /// Critical patch: a disk of `radius` or a lattice rectangle `(m0, m1, n0, n1)`.
    #[staticmethod]
    #[pyo3(signature = (radius = None, rect = None, delta = 1.0, style = "square"))]
    fn rhombic_patch(radius: Option<f64>, rect: Option<[i64; 4]>, delta: f64, style: &str) -> PyResult<Self> {
        let shape = match (radius, rect) {
            (Some(r), None) => PatchShape::Disk { radius: r },
            (None, Some(r)) => PatchShape::Rect { m0: r[0], m1: r[1], n0: r[2], n1: r[3] },
            _ => return Err(PyValueError::new_err("give exactly one of radius and rect")),
        };
        let style = match style {
            "square" => PatchStyle::Square,
            "trihex" => PatchStyle::Trihex,
            _ => return Err(PyValueError::new_err(format!("unknown style '{style}'"))),
        };
        Ok(PyComplex { inner: generate_rhombic_patch(shape, delta, style).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PyComplex { inner: QuadComplex::from_json(s).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.n_edges()
    }

    #[getter]
    fn n_faces(&self) -> usize {
        self.inner.n_faces()
    }

    #[getter]
    fn genus(&self) -> Option<usize> {
        self.inner.genus()
    }

    #[getter]
    fn closed(&self) -> bool {
        self.inner.is_closed()
    }

    #[getter]
    fn origin(&self) -> Option<usize> {
        self.inner.origin()
    }

    /// Vertex positions, if the complex is embedded.
    #[getter]
    fn z(&self) -> Option<Vec<C64>> {
        self.inner.z().map(|z| z.to_vec())
    }

    /// `(kind, detail)` for every structural violation.
    fn validate(&self) -> Vec<(String, String)> {
        self.inner.validate().into_iter().map(|v| (format!("{:?}", v.kind).to_lowercase(), v.detail)).collect()
    }

    /// The `periods.json` document as a dict.
    fn periods(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let (_, gb, pd) = compute_periods(&self.inner).map_err(err)?;
        let mut doc = periods_json(&gb, &pd);
        doc["checks"] = serde_json::to_value(verify::period_checks(&gb, &pd)).expect("checks serialize");
        to_py(py, &doc)
    }

    /// Run invariant suites; `None` runs every suite that applies.
    #[pyo3(signature = (suites = None, seed = 1))]
    fn verify(&self, py: Python<'_>, suites: Option<Vec<String>>, seed: u64) -> PyResult<Py<PyAny>> {
        let suites = match suites {
            Some(s) => s.iter().map(|x| x.parse::<Suite>()).collect::<Result<Vec<_>, _>>().map_err(err)?,
            None => Suite::applicable(&self.inner),
        };
        let r = verify::run(&self.inner, &suites, seed);
        let doc = serde_json::json!({ "pass": r.pass(), "checks": r.checks, "errors": r.errors });
        to_py(py, &doc)
    }

    /// Discrete exponential `e(λ)` at every vertex, measured from the origin.
    fn exp(&self, lam: C64) -> PyResult<Vec<C64>> {
        let m = self.critical()?;
        critical::exp_all(&m, &self.inner, lam).map_err(err)
    }

    /// Discrete monomial `Z^{:k:}`.
    fn monomial(&self, k: usize) -> PyResult<Vec<C64>> {
        let m = self.critical()?;
        Ok(Monomials::new(&m, &self.inner, k).map_err(err)?.cochain(k).values)
    }

    /// Green function with quadrature summary.
    #[pyo3(signature = (nodes = 4096))]
    fn green(&self, py: Python<'_>, nodes: usize) -> PyResult<Py<PyAny>> {
        let m = self.critical()?;
        let g = critical::green_function(&m, &self.inner, &GreenParams { nodes, ..Default::default() }).map_err(err)?;
        let doc = serde_json::json!({
            "values": g.values.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "laplacian_residual": g.laplacian_residual(&m, &self.inner),
            "refinement_gap": g.refinement_gap,
        });
        to_py(py, &doc)
    }

    #[pyo3(signature = (f, lam, u, kind = "linear"))]
    fn backlund(&self, f: Vec<C64>, lam: C64, u: C64, kind: &str) -> PyResult<Vec<C64>> {
        let f = self.values(f)?;
        Ok(integrable::backlund(&self.inner, &f, lam, u, self::kind(kind)?).map_err(err)?.values)
    }

    #[pyo3(signature = (f, lam, u, kind = "linear"))]
    fn backlund_roundtrip(&self, f: Vec<C64>, lam: C64, u: C64, kind: &str) -> PyResult<f64> {
        let f = self.values(f)?;
        integrable::backlund_roundtrip(&self.inner, &f, lam, u, self::kind(kind)?).map_err(err)
    }

    fn hirota_from_function(&self, f: Vec<C64>, w0: C64) -> PyResult<Vec<C64>> {
        let f = self.values(f)?;
        integrable::hirota_from_function(&self.inner, &f, w0).map_err(err)
    }

    fn hirota_integrate(&self, w: Vec<C64>) -> PyResult<Vec<C64>> {
        let w = self.values(w)?;
        integrable::hirota_integrate(&self.inner, &w).map_err(err)
    }

    /// Largest cross-ratio residual over faces.
    fn cross_ratio_residual(&self, f: Vec<C64>) -> PyResult<f64> {
        let f = self.values(f)?;
        Ok(integrable::cross_ratio_residual(&self.inner, &f).map_err(err)?.max_cross_ratio())
    }

    fn __repr__(&self) -> String {
        format!(
            "Complex(vertices={}, faces={}, genus={:?})",
            self.inner.n_vertices(),
            self.inner.n_faces(),
            self.inner.genus()
        )
    }
}

/// `max |Z^{:k:} − z^k|` on the unit disk for `δ = 2^{-level}`, with successive ratios.
#[pyfunction]
#[pyo3(signature = (k = 3, levels = vec![2, 3, 4, 5, 6]))]
fn convergence(k: usize, levels: Vec<u32>) -> PyResult<(Vec<(f64, usize, f64)>, Vec<f64>)> {
    let rows = critical::monomial_convergence(k, &levels).map_err(err)?;
    let r = critical::ratios(&rows);
    Ok((rows.iter().map(|x| (x.delta, x.vertices, x.error)).collect(), r))
}

#[pymodule]
#[pyo3(name = "quadsurf")]
fn quadsurf_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyComplex>()?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    Ok(())
}
