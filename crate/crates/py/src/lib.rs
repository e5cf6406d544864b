use pyo3::prelude::*;

#[pymodule]
fn retroshift_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
