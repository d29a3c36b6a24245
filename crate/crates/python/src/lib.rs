//! Python bindings: parse descriptions, compile plans and run deployments
//! against the simulated runtimes.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use polydeploy::backends::{Deployer, MockRuntime, RuntimeKind};
use polydeploy::engine::{self, build_dependency_lists, EngineConfig};
use polydeploy::frontends::{self, ParseDiagnostic};
use polydeploy::model;
use polydeploy::planner::{self, TaskId};

create_exception!(polydeploy_py, ParseError, PyException);
create_exception!(polydeploy_py, PlanError, PyException);

fn parse_error(diags: Vec<ParseDiagnostic>) -> PyErr {
    let lines: Vec<String> = diags.iter().map(ToString::to_string).collect();
    ParseError::new_err(lines.join("\n"))
}

fn runtime_kind(backend: &str) -> PyResult<RuntimeKind> {
    match backend {
        "flat" => Ok(RuntimeKind::Flat),
        "hier" => Ok(RuntimeKind::Hierarchical),
        other => Err(PyValueError::new_err(format!(
            "unknown backend '{other}', expected 'flat' or 'hier'"
        ))),
    }
}

/// A platform-independent configuration.
#[pyclass(name = "Configuration", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyConfiguration {
    inner: model::Configuration,
}

#[pymethods]
impl PyConfiguration {
    #[getter]
    fn types(&self) -> Vec<String> {
        self.inner.types.iter().map(|t| t.name.clone()).collect()
    }

    #[getter]
    fn instances(&self) -> Vec<(String, String, String)> {
        self.inner
            .instances
            .iter()
            .map(|i| (i.id.clone(), i.type_name.clone(), i.site.clone()))
            .collect()
    }

    #[getter]
    fn bindings(&self) -> Vec<(String, String, String, String)> {
        self.inner
            .bindings
            .iter()
            .map(|b| {
                (
                    b.client_instance.clone(),
                    b.client_port.clone(),
                    b.server_instance.clone(),
                    b.server_port.clone(),
                )
            })
            .collect()
    }

    #[getter]
    fn containments(&self) -> Vec<(String, String, String)> {
        self.inner
            .containments
            .iter()
            .map(|c| (c.parent.clone(), c.child.clone(), c.child_name.clone()))
            .collect()
    }

    /// Violations as (code, element, message) tuples; empty when valid.
    fn validate(&self) -> Vec<(String, String, String)> {
        model::validate(&self.inner)
            .into_iter()
            .map(|v| (v.code.to_string(), v.element.to_string(), v.message))
            .collect()
    }

    fn to_native(&self) -> String {
        frontends::emit_native(&self.inner)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner.canonical() == other.inner.canonical()
    }

    fn __repr__(&self) -> String {
        format!(
            "Configuration(types={}, instances={}, bindings={}, containments={})",
            self.inner.types.len(),
            self.inner.instances.len(),
            self.inner.bindings.len(),
            self.inner.containments.len()
        )
    }
}

/// A compiled deployment plan.
#[pyclass(name = "TaskGraph", frozen, skip_from_py_object)]
pub struct PyTaskGraph {
    inner: planner::TaskGraph,
}

#[pymethods]
impl PyTaskGraph {
    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    /// (id, kind, label) per task, sorted by id.
    fn nodes(&self) -> Vec<(String, String, String)> {
        self.inner
            .nodes()
            .map(|n| (n.id.to_string(), n.kind.to_string(), n.label()))
            .collect()
    }

    /// (from, to, interface) per dependency.
    fn edges(&self) -> Vec<(String, String, String)> {
        self.inner
            .edges()
            .map(|e| {
                (
                    e.from.to_string(),
                    e.to.to_string(),
                    e.interface.to_string(),
                )
            })
            .collect()
    }

    /// Predecessor ids of `task`.
    fn predecessors(&self, task: &str) -> PyResult<Vec<String>> {
        let lists = build_dependency_lists(&self.inner);
        lists
            .predecessors
            .get(&TaskId::new(task))
            .map(|s| s.iter().map(ToString::to_string).collect())
            .ok_or_else(|| PyValueError::new_err(format!("no task '{task}'")))
    }

    fn to_dot(&self) -> String {
        planner::graph_to_dot(&self.inner)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn is_isomorphic(&self, other: &Self) -> bool {
        self.inner.is_isomorphic(&other.inner)
    }
}

/// Result of a deployment run.
#[pyclass(name = "Deployment", frozen, get_all, skip_from_py_object)]
pub struct PyDeployment {
    /// `completed`, `cycle_detected:<ids>` or `task_failed:<id>`.
    outcome: String,
    trace: String,
    snapshot: String,
}

#[pymethods]
impl PyDeployment {
    #[getter]
    fn completed(&self) -> bool {
        self.outcome == "completed"
    }

    fn __repr__(&self) -> String {
        format!("Deployment(outcome={:?})", self.outcome)
    }
}

#[pyfunction]
fn parse_native(text: &str) -> PyResult<PyConfiguration> {
    frontends::parse_native(text)
        .map(|inner| PyConfiguration { inner })
        .map_err(parse_error)
}

#[pyfunction]
fn parse_adl(xml: &str) -> PyResult<PyConfiguration> {
    frontends::parse_adl(xml)
        .map(|inner| PyConfiguration { inner })
        .map_err(parse_error)
}

#[pyfunction]
fn emit_native(config: &PyConfiguration) -> String {
    frontends::emit_native(&config.inner)
}

#[pyfunction]
#[pyo3(signature = (config, backend = "hier"))]
fn compile(config: &PyConfiguration, backend: &str) -> PyResult<PyTaskGraph> {
    let caps = runtime_kind(backend)?.capabilities();
    planner::compile(&config.inner, &caps)
        .map(|inner| PyTaskGraph { inner })
        .map_err(|e| PlanError::new_err(format!("{}: {e}", e.code())))
}

/// Compiles `config` and runs it on a fresh simulated runtime.
#[pyfunction]
#[pyo3(signature = (config, backend = "hier", workers = 1, fail_task = None))]
fn deploy(
    py: Python<'_>,
    config: &PyConfiguration,
    backend: &str,
    workers: usize,
    fail_task: Option<String>,
) -> PyResult<PyDeployment> {
    if workers == 0 {
        return Err(PyValueError::new_err("workers must be at least 1"));
    }
    let kind = runtime_kind(backend)?;
    let graph = planner::compile(&config.inner, &kind.capabilities())
        .map_err(|e| PlanError::new_err(format!("{}: {e}", e.code())))?;
    let config = config.inner.clone();
    let (trace, snapshot) = py.detach(move || {
        let runtime = MockRuntime::for_config(kind, &config);
        let deployer = Deployer::new(&runtime).failing_on(fail_task.map(TaskId::new));
        let trace = engine::execute(&graph, &deployer, &EngineConfig::new(workers));
        (trace, runtime.snapshot())
    });
    Ok(PyDeployment {
        outcome: trace.outcome.to_string(),
        trace: trace.to_text(),
        snapshot: snapshot.to_text(),
    })
}

#[pymodule]
fn polydeploy_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfiguration>()?;
    m.add_class::<PyTaskGraph>()?;
    m.add_class::<PyDeployment>()?;
    m.add("ParseError", m.py().get_type::<ParseError>())?;
    m.add("PlanError", m.py().get_type::<PlanError>())?;
    m.add_function(wrap_pyfunction!(parse_native, m)?)?;
    m.add_function(wrap_pyfunction!(parse_adl, m)?)?;
    m.add_function(wrap_pyfunction!(emit_native, m)?)?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    m.add_function(wrap_pyfunction!(deploy, m)?)?;
    Ok(())
}
