//! Python bindings: diagrams, composition, semantics and simulation.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use stockflow::io::{self, Document};
use stockflow::open::{self, iso_check};
use stockflow::semantics::{self, diagram_vector_field};
use stockflow::{models, morphism, Method, OpenDiagram, Params, Scenario};

fn invalid(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// `(columns, times, states)` of a trajectory.
type Table = (Vec<String>, Vec<f64>, Vec<Vec<f64>>);

fn runtime(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A stock-flow diagram, simple or full, with zero or more legs.
#[pyclass(name = "Diagram", module = "stockflow", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyDiagram {
    inner: OpenDiagram,
}

impl PyDiagram {
    fn from_document(doc: Document) -> PyResult<Self> {
        doc.into_open().map(|inner| PyDiagram { inner }).map_err(invalid)
    }
}

#[pymethods]
impl PyDiagram {
    /// Reads a diagram from a JSON file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Self::from_document(io::load(path).map_err(invalid)?)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::from_document(io::from_json_str(text).map_err(invalid)?)
    }

    fn to_json(&self) -> PyResult<String> {
        io::to_json_string(&self.document()).map_err(invalid)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        io::save(&self.document(), path).map_err(invalid)
    }

    #[getter]
    fn stocks(&self) -> Vec<String> {
        self.inner.inner.stock_names().into_iter().map(String::from).collect()
    }

    #[getter]
    fn flow_count(&self) -> usize {
        self.inner.inner.flow_count()
    }

    #[getter]
    fn leg_count(&self) -> usize {
        self.inner.legs.len()
    }

    #[getter]
    fn is_full(&self) -> bool {
        self.inner.inner.is_full()
    }

    /// Parameter names referenced by the diagram's expressions.
    #[getter]
    fn params(&self) -> Vec<String> {
        self.inner.inner.params()
    }

    /// Structural problems, one message each; empty when valid.
    fn validate(&self) -> Vec<String> {
        self.inner.inner.validate().iter().map(|v| v.to_string()).collect()
    }

    fn equations(&self) -> String {
        semantics::equations(&self.inner.inner)
    }

    fn to_dot(&self) -> String {
        io::export_dot(&self.inner.inner)
    }

    /// Evaluates the vector field at a state given in stock order.
    fn vector_field(&self, state: Vec<f64>, params: Params) -> PyResult<Vec<f64>> {
        diagram_vector_field(&self.inner.inner).eval(&state, &params).map_err(invalid)
    }

    /// Integrates the diagram and returns `(columns, times, states)`.
    #[pyo3(signature = (initial, params, t1, dt, t0 = 0.0, method = "rk4", save_every = 1))]
    #[allow(clippy::too_many_arguments)]
    fn simulate(
        &self,
        py: Python<'_>,
        initial: BTreeMap<String, f64>,
        params: Params,
        t1: f64,
        dt: f64,
        t0: f64,
        method: &str,
        save_every: usize,
    ) -> PyResult<Table> {
        let method = match method {
            "rk4" => Method::Rk4,
            "euler" => Method::Euler,
            other => return Err(invalid(format!("unknown method `{other}` (expected rk4 or euler)"))),
        };
        let sc = Scenario { t0, method, save_every, ..Scenario::new(initial, params, t1, dt) };
        let system = diagram_vector_field(&self.inner.inner);
        let traj = py
            .detach(|| stockflow::simulate(&system, &sc))
            .map_err(|e| match e {
                stockflow::integrate::SimulateError::NonFiniteState { .. } => runtime(e),
                other => invalid(other),
            })?;
        Ok((traj.columns, traj.times, traj.states))
    }

    fn __repr__(&self) -> String {
        format!(
            "Diagram(stocks={:?}, flows={}, legs={})",
            self.stocks(),
            self.flow_count(),
            self.leg_count()
        )
    }

    fn __eq__(&self, other: &PyDiagram) -> bool {
        self.inner == other.inner
    }
}

impl PyDiagram {
    fn document(&self) -> Document {
        if self.inner.legs.is_empty() {
            self.inner.inner.clone().into()
        } else {
            Document::Open(self.inner.clone())
        }
    }
}

/// Names of the built-in models.
#[pyfunction]
fn catalog() -> Vec<&'static str> {
    models::catalog().iter().map(|e| e.name).collect()
}

/// A built-in diagram by name.
#[pyfunction]
fn model(name: &str) -> PyResult<PyDiagram> {
    PyDiagram::from_document(models::model(name).map_err(invalid)?)
}

/// Glues leg `a_leg` of `a` to leg `b_leg` of `b`, matching feet by name.
#[pyfunction]
fn compose_pair(a: &PyDiagram, a_leg: usize, b: &PyDiagram, b_leg: usize) -> PyResult<PyDiagram> {
    open::compose_pair(&a.inner, a_leg, &b.inner, b_leg)
        .map(|inner| PyDiagram { inner })
        .map_err(invalid)
}

/// Composes fillers along a wiring pattern given as a JSON file path.
#[pyfunction]
fn oapply(pattern: &str, fillers: BTreeMap<String, PyDiagram>) -> PyResult<PyDiagram> {
    let uwd = match io::load(pattern).map_err(invalid)? {
        Document::Uwd(u) => u,
        other => return Err(invalid(format!("expected a uwd document, found `{}`", other.kind()))),
    };
    let fillers = fillers.into_iter().map(|(k, d)| (k, d.inner)).collect();
    open::oapply(&uwd, &fillers).map(|inner| PyDiagram { inner }).map_err(invalid)
}

/// Whether two open diagrams are isomorphic, ignoring names.
#[pyfunction]
fn is_isomorphic(a: &PyDiagram, b: &PyDiagram) -> PyResult<bool> {
    iso_check(&a.inner, &b.inner).map(|m| m.is_some()).map_err(invalid)
}

/// Maximum flow-equation discrepancy of a morphism file between two simple diagrams.
#[pyfunction]
#[pyo3(signature = (morphism, source, target, params, samples = 100, seed = 7))]
fn check_morphism(
    morphism: &str,
    source: &PyDiagram,
    target: &PyDiagram,
    params: Params,
    samples: usize,
    seed: u64,
) -> PyResult<f64> {
    let spec = match io::load(morphism).map_err(invalid)? {
        Document::Morphism(m) => m,
        other => return Err(invalid(format!("expected a morphism document, found `{}`", other.kind()))),
    };
    let simple = |d: &PyDiagram| match &d.inner.inner {
        stockflow::Diagram::Simple(s) => Ok(s.clone()),
        stockflow::Diagram::Full(_) => Err(invalid("morphisms relate simple diagrams")),
    };
    let (a, b) = (simple(source)?, simple(target)?);
    let alpha = spec.resolve(&a.primitive, &b.primitive).map_err(invalid)?;
    let check = morphism::FlowCheck { samples, seed, ..Default::default() };
    morphism::check_flow_equation(&alpha, &a, &b, &params, &check)
        .map(|r| r.max_discrepancy())
        .map_err(invalid)
}

#[pymodule]
#[pyo3(name = "stockflow")]
pub fn stockflow_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDiagram>()?;
    m.add_function(wrap_pyfunction!(catalog, m)?)?;
    m.add_function(wrap_pyfunction!(model, m)?)?;
    m.add_function(wrap_pyfunction!(compose_pair, m)?)?;
    m.add_function(wrap_pyfunction!(oapply, m)?)?;
    m.add_function(wrap_pyfunction!(is_isomorphic, m)?)?;
    m.add_function(wrap_pyfunction!(check_morphism, m)?)?;
    Ok(())
}
