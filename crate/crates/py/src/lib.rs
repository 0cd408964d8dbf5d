//! Python bindings for `spencer-core`.

use pyo3::exceptions::{PyMemoryError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use spencer_core::kernel::{self, tension_report};
use spencer_core::lie;
use spencer_core::linalg::NullspaceOptions;
use spencer_core::rep;
use spencer_core::spencer::{delta_constrained, parse_lambda, verify_mirror};
use spencer_core::sym::DEFAULT_MAX_DIM;
use spencer_core::varsolve::{certify_compatible_pair, minimize, VarConfig};
use spencer_core::SpencerError;

fn err(e: SpencerError) -> PyErr {
    match e {
        SpencerError::ResourceCap { .. } => PyMemoryError::new_err(e.to_string()),
        SpencerError::Diverged { .. } | SpencerError::RankDisagreement(..) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A semisimple Lie algebra in its Chevalley basis.
#[pyclass(name = "LieAlgebra", frozen)]
struct PyLieAlgebra {
    inner: lie::LieAlgebra,
}

#[pymethods]
impl PyLieAlgebra {
    #[new]
    fn new(label: &str) -> PyResult<Self> {
        Ok(PyLieAlgebra {
            inner: lie::LieAlgebra::from_label(label).map_err(err)?,
        })
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank
    }

    #[getter]
    fn num_roots(&self) -> usize {
        2 * self.inner.num_positive_roots()
    }

    #[getter]
    fn basis_labels(&self) -> Vec<String> {
        self.inner.basis_labels.clone()
    }

    #[getter]
    fn cartan_matrix(&self) -> Vec<Vec<i64>> {
        self.inner.roots.datum.cartan_matrix.clone()
    }

    /// `[x_i, x_j]` as a list of `(index, coefficient)`.
    fn bracket(&self, i: usize, j: usize) -> PyResult<Vec<(usize, i64)>> {
        let n = self.inner.dim;
        if i >= n || j >= n {
            return Err(PyValueError::new_err(format!("basis index out of range 0..{n}")));
        }
        Ok(self.inner.bracket_basis(i, j).to_vec())
    }

    fn jacobi_holds(&self) -> bool {
        self.inner.jacobi_violation().is_none()
    }

    fn killing_determinant(&self) -> String {
        self.inner.killing_determinant().to_string()
    }

    fn __repr__(&self) -> String {
        format!("LieAlgebra('{}')", self.inner.label())
    }
}

/// Kernel of the constrained operator on `Sym^k`; returns a dict.
#[pyfunction]
#[pyo3(signature = (algebra, k, lam = "preset:cartan1", max_dim = DEFAULT_MAX_DIM as u64))]
fn kernel_summary<'py>(
    py: Python<'py>,
    algebra: &PyLieAlgebra,
    k: usize,
    lam: &str,
    max_dim: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let g = &algebra.inner;
    let lam = parse_lambda(g, lam).map_err(err)?;
    let out = py
        .detach(|| -> spencer_core::Result<_> {
            let sm = delta_constrained(g, &lam, k, max_dim as u128)?;
            let kb = kernel::kernel(&sm, &NullspaceOptions::default())?;
            Ok(serde_json::json!({
                "k": k,
                "rows": sm.matrix.nrows,
                "cols": sm.matrix.ncols,
                "rank": kb.rank,
                "kernel_dim": kb.dim,
                "certificate": kb.certificate,
            }))
        })
        .map_err(err)?;
    to_py(py, &out)
}

/// Does `delta^lam + delta^-lam` vanish on `Sym^k`?
#[pyfunction]
#[pyo3(signature = (algebra, k, lam = "preset:cartan1"))]
fn mirror_holds(algebra: &PyLieAlgebra, k: usize, lam: &str) -> PyResult<bool> {
    let g = &algebra.inner;
    let lam = parse_lambda(g, lam).map_err(err)?;
    Ok(verify_mirror(g, &lam, k, DEFAULT_MAX_DIM).map_err(err)?.holds)
}

#[pyfunction]
fn min_irrep_dim(label: &str) -> PyResult<u64> {
    let g = lie::LieAlgebra::from_label(label).map_err(err)?;
    kernel::min_irrep_dim(g.roots.datum.family, g.rank).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (label, h11, kernel_dim = None))]
fn tension<'py>(py: Python<'py>, label: &str, h11: u64, kernel_dim: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let g = lie::LieAlgebra::from_label(label).map_err(err)?;
    to_py(py, &tension_report(&g, h11, kernel_dim).map_err(err)?)
}

/// Weyl dimension of the irreducible module with the given Dynkin labels.
#[pyfunction]
fn weyl_dim(algebra: &PyLieAlgebra, highest_weight: Vec<i64>) -> PyResult<u128> {
    rep::weyl_dim(&algebra.inner, &highest_weight).map_err(err)
}

/// Peel a weight multiset into irreducibles; returns a list of dicts.
#[pyfunction]
fn decompose_character<'py>(
    py: Python<'py>,
    algebra: &PyLieAlgebra,
    weights: Vec<Vec<i64>>,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &rep::decompose_character(&algebra.inner, &weights).map_err(err)?)
}

/// Run the lattice solver from a JSON config string.
#[pyfunction]
fn varsolve<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let config: VarConfig = serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let out = py
        .detach(|| -> spencer_core::Result<_> {
            let (b, start) = config.build()?;
            let run = minimize(&b, &start, &config.weights, &config.solver)?;
            let cert = certify_compatible_pair(&b, &run.config, config.certificate_tolerance)?;
            Ok(serde_json::json!({
                "iterations": run.trace.len() - 1,
                "termination": run.termination,
                "final_energy": run.final_energy,
                "final_grad_norm": run.final_grad_norm,
                "trace_totals": run.trace.iter().map(|r| r.total).collect::<Vec<_>>(),
                "compatible_edges": cert.compatible_edges,
                "total_edges": cert.total_edges,
            }))
        })
        .map_err(err)?;
    to_py(py, &out)
}

/// Run the command line with the given arguments; returns the exit status.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    spencer_core::cli::run(std::iter::once("spencer".to_string()).chain(args))
}

#[pymodule]
pub fn spencer_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLieAlgebra>()?;
    m.add_function(wrap_pyfunction!(kernel_summary, m)?)?;
    m.add_function(wrap_pyfunction!(mirror_holds, m)?)?;
    m.add_function(wrap_pyfunction!(min_irrep_dim, m)?)?;
    m.add_function(wrap_pyfunction!(tension, m)?)?;
    m.add_function(wrap_pyfunction!(weyl_dim, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_character, m)?)?;
    m.add_function(wrap_pyfunction!(varsolve, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
