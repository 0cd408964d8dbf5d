//! The extension module driven from an embedded interpreter.

use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(spencer_py::spencer_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("sp", m).unwrap();
        f(py, &globals);
    });
}

fn eval<'py>(py: Python<'py>, globals: &Bound<'py, PyDict>, code: &str) -> Bound<'py, PyAny> {
    let code = std::ffi::CString::new(code).unwrap();
    py.eval(&code, Some(globals), None).unwrap()
}

#[test]
fn algebra_tables() {
    with_module(|py, g| {
        assert_eq!(eval(py, g, "sp.LieAlgebra('E7').dim").extract::<usize>().unwrap(), 133);
        assert_eq!(eval(py, g, "sp.LieAlgebra('E7').num_roots").extract::<usize>().unwrap(), 126);
        assert!(eval(py, g, "sp.LieAlgebra('G2').jacobi_holds()").extract::<bool>().unwrap());
        assert_eq!(eval(py, g, "sp.min_irrep_dim('F4')").extract::<u64>().unwrap(), 26);
    });
}

#[test]
fn kernels_and_verdicts() {
    with_module(|py, g| {
        let k = eval(py, g, "sp.kernel_summary(sp.LieAlgebra('A2'), 2, 'preset:zero')['kernel_dim']");
        assert_eq!(k.extract::<usize>().unwrap(), 36);
        let v = eval(py, g, "sp.tension('E8', 56)['verdict']");
        assert_eq!(v.extract::<String>().unwrap(), "infeasible");
        assert!(eval(py, g, "sp.mirror_holds(sp.LieAlgebra('A1'), 3, 'preset:dense:1')").extract::<bool>().unwrap());
        let w = eval(py, g, "sp.weyl_dim(sp.LieAlgebra('G2'), [1, 0])");
        assert_eq!(w.extract::<u128>().unwrap(), 7);
    });
}

#[test]
fn errors_surface_as_python_exceptions() {
    with_module(|py, g| {
        let code = std::ffi::CString::new("sp.LieAlgebra('Z9')").unwrap();
        let err = py.eval(&code, Some(g), None).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        let code = std::ffi::CString::new("sp.kernel_summary(sp.LieAlgebra('E7'), 3, max_dim=1000)").unwrap();
        let err = py.eval(&code, Some(g), None).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyMemoryError>(py));
    });
}
