use pyo3::prelude::*;
use pyo3::types::PyDict;

use stockflow_py::stockflow_module;

fn run(code: &std::ffi::CStr) -> PyResult<()> {
    Python::attach(|py| {
        let module = PyModule::new(py, "stockflow")?;
        stockflow_module(&module)?;
        let globals = PyDict::new(py);
        globals.set_item("stockflow", module)?;
        py.run(code, Some(&globals), None)
    })
}

#[test]
fn composite_is_exposed() {
    Python::initialize();
    run(c"
d = stockflow.model('covid_composite')
assert d.stocks == ['S', 'E', 'I', 'R', 'HICU', 'HNICU', 'VP', 'VF', 'IA'], d.stocks
assert d.leg_count == 4
assert len(d.equations().splitlines()) == 9
")
    .unwrap();
}

#[test]
fn simulate_and_errors() {
    Python::initialize();
    run(c"
sir = stockflow.model('sir_simple')
p = {'beta': 0.3, 't_r': 10.0, 't_w': 180.0}
cols, t, x = sir.simulate({'S': 990.0, 'I': 10.0, 'R': 0.0}, p, 10.0, 0.5, method='euler')
assert cols == ['S', 'I', 'R'] and t[-1] == 10.0 and len(x) == len(t)
try:
    sir.simulate({'S': 1.0, 'I': 1.0, 'R': 0.0}, {}, 1.0, 0.1)
    raise AssertionError('unbound parameter accepted')
except ValueError as e:
    assert 'beta' in str(e)
try:
    stockflow.model('nope')
    raise AssertionError('unknown model accepted')
except ValueError:
    pass
")
    .unwrap();
}

#[test]
fn iso_check_is_exposed() {
    Python::initialize();
    run(c"
a = stockflow.model('covid_asymptomatic')
seirh = stockflow.model('covid_seirh')
assert not stockflow.is_isomorphic(a, seirh)
assert stockflow.is_isomorphic(a, stockflow.Diagram.from_json(a.to_json()))
")
    .unwrap();
}
