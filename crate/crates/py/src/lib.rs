//! Python bindings: load an app, open sessions, run commands, score a
//! parser. Structured results come back as plain dicts and lists.

use std::sync::{Arc, Mutex};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use genie_core::app::{foodordering, AppBundle};
use genie_core::datetime::{DateTime, FixedClock};
use genie_core::dsl;
use genie_core::eval::{parse_dataset, run_eval};
use genie_core::interp::type_check;
use genie_core::nl::{MockBackend, PromptBuilder};
use genie_core::session::{Backends, Runtime as CoreRuntime, Session as CoreSession};
use genie_core::ui::{ScreenSnapshot, TapPoint, VisibleComponent};
use genie_core::value::InstanceRef;

fn to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (value.to_string(),))?.unbind())
}

fn from_py(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    let json = py.import("json")?;
    let text: String = json.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Parse and print a command in canonical form. Raises ValueError on a
/// syntax error.
#[pyfunction]
fn canonicalize(source: &str) -> PyResult<String> {
    dsl::parse(source).map(|e| dsl::print(&e)).map_err(value_err)
}

/// An app bundle plus a mock parser, shared by its sessions.
#[pyclass(module = "genie")]
struct Runtime {
    inner: CoreRuntime,
}

#[pymethods]
impl Runtime {
    /// `fixture` maps utterances to completions; defaults to the bundled
    /// demo fixture. `now` is an ISO timestamp for the session clock.
    #[new]
    #[pyo3(signature = (app = "foodordering", fixture = None, now = None))]
    fn new(app: &str, fixture: Option<std::collections::HashMap<String, String>>, now: Option<&str>) -> PyResult<Self> {
        let bundle = AppBundle::load(app).map_err(value_err)?;
        let mock = match fixture {
            Some(map) => MockBackend::new(map),
            None => MockBackend::from_json_str(foodordering::FIXTURE).map_err(value_err)?,
        };
        let time = match now {
            Some(iso) => iso.parse::<DateTime>().map_err(value_err)?,
            None => bundle.reference_time,
        };
        Ok(Runtime {
            inner: CoreRuntime::new(bundle, Backends::same(Arc::new(mock)), Arc::new(FixedClock(time))),
        })
    }

    fn schema(&self) -> String {
        self.inner.prompts().schema()
    }

    fn parser_prompt(&self, utterance: &str) -> String {
        PromptBuilder::new(&self.inner.app.registry, &self.inner.app.examples).parser_prompt(utterance)
    }

    /// Type-check a command; returns its canonical form or raises ValueError.
    fn check(&self, source: &str) -> PyResult<String> {
        let expr = dsl::parse(source).map_err(value_err)?;
        type_check(&expr, &self.inner.app.registry).map_err(value_err)?;
        Ok(dsl::print(&expr))
    }

    #[pyo3(signature = (id = None))]
    fn session(&self, id: Option<String>) -> PyResult<Session> {
        let id = id.unwrap_or_else(|| "py".to_string());
        let session = self.inner.new_session(id).map_err(value_err)?;
        Ok(Session {
            runtime: self.inner.clone(),
            inner: Mutex::new(session),
        })
    }

    /// Score the mock parser on a JSON dataset (the bundled one by default).
    #[pyo3(signature = (dataset = None))]
    fn evaluate(&self, py: Python<'_>, dataset: Option<&str>) -> PyResult<Py<PyAny>> {
        let records = parse_dataset(dataset.unwrap_or(foodordering::DATASET)).map_err(value_err)?;
        let report = run_eval(&self.inner.app, &records, self.inner.backends.parser.as_ref(), 1).map_err(value_err)?;
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).map_err(value_err)?;
        to_py(py, &json)
    }
}

#[pyclass(module = "genie")]
struct Session {
    runtime: CoreRuntime,
    inner: Mutex<CoreSession>,
}

impl Session {
    fn with<T>(&self, f: impl FnOnce(&mut CoreSession) -> T) -> PyResult<T> {
        let mut guard = self
            .inner
            .try_lock()
            .map_err(|_| PyRuntimeError::new_err("session is busy"))?;
        Ok(f(&mut guard))
    }
}

fn taps_from(taps: Vec<(f64, f64)>) -> Vec<TapPoint> {
    taps.into_iter()
        .enumerate()
        .map(|(i, (x, y))| TapPoint::new(x, y, i))
        .collect()
}

#[pymethods]
impl Session {
    /// Natural-language command; returns the wire result dict.
    #[pyo3(signature = (text, taps = Vec::new()))]
    fn command(&self, py: Python<'_>, text: &str, taps: Vec<(f64, f64)>) -> PyResult<Py<PyAny>> {
        let taps = taps_from(taps);
        let wire = self.with(|s| self.runtime.handle_command(s, text, &taps).to_wire())?;
        to_py(py, &wire)
    }

    /// Literal command, no parser involved.
    #[pyo3(signature = (source, taps = Vec::new()))]
    fn execute(&self, py: Python<'_>, source: &str, taps: Vec<(f64, f64)>) -> PyResult<Py<PyAny>> {
        let taps = taps_from(taps);
        let wire = self.with(|s| self.runtime.execute_dsl(s, source, &taps).to_wire())?;
        to_py(py, &wire)
    }

    /// Replace the visible components: a list of
    /// `{"template", "class", "instance_id", "bbox": {"x", "y", "w", "h"}}`.
    fn set_screen(&self, py: Python<'_>, components: &Bound<'_, PyAny>) -> PyResult<()> {
        let json = from_py(py, components)?;
        let components: Vec<VisibleComponent> = serde_json::from_value(json).map_err(value_err)?;
        self.with(|s| s.update_screen(ScreenSnapshot::new("", components)))
    }

    fn state(&self, py: Python<'_>, class: &str, id: &str) -> PyResult<Py<PyAny>> {
        let json = self
            .with(|s| s.store.instance_json(&InstanceRef::new(class, id), true))?
            .map_err(value_err)?;
        to_py(py, &json)
    }

    #[getter]
    fn revision(&self) -> PyResult<u64> {
        self.with(|s| s.store.revision())
    }

    fn history_len(&self) -> PyResult<usize> {
        self.with(|s| s.history.len())
    }
}

#[pymodule]
fn genie(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(canonicalize, m)?)?;
    m.add_class::<Runtime>()?;
    m.add_class::<Session>()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalize_normalizes_spacing() {
        assert_eq!(canonicalize("Restaurant.All( ).count()").unwrap(), "Restaurant.All().count()");
    }
}
