//! Python bindings for the finsler-core engine.
//!
//! Exposes metric construction from a JSON spec, pointwise tensor
//! evaluation, the named connections with their processes, curvature
//! triples, classification, identity verification and geodesics.

use finsler_core::connections::{
    apply_process, build_connection, connection_coefficients, landsberg_suite,
    torsion_components, ConnectionKind, FinslerConnection, ProcessKind,
};
use finsler_core::curvature::{classify_metric_with_tolerance, curvature_triple, CLASSIFY_TOLERANCE};
use finsler_core::metrics::{
    angular_metric, build_metric, cartan_tensor, fundamental_tensor, matsumoto_torsion,
    MetricModel, MetricSpec, ModelPoint,
};
use finsler_core::processes::verify_process_identities;
use finsler_core::sample::SamplePlan;
use finsler_core::spray::{flag_curvature, integrate_geodesic, spray_coefficients};
use finsler_core::FinslerError;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList, PyString};
use serde_json::Value;

fn err_to_py(e: FinslerError) -> PyErr {
    match e {
        FinslerError::Config(msg) => PyValueError::new_err(msg),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json_to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any().unbind()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind()
            }
        }
        Value::String(s) => PyString::new(py, s).into_any().unbind(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn serialize_to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let value = serde_json::to_value(v)
        .map_err(|e| PyRuntimeError::new_err(format!("serialization failed: {}", e)))?;
    json_to_py(py, &value)
}

fn nested2(n: usize, get: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| get(i, j)).collect()).collect()
}

fn nested3(n: usize, get: impl Fn(usize, usize, usize) -> f64) -> Vec<Vec<Vec<f64>>> {
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| get(i, j, k)).collect()).collect())
        .collect()
}

fn nested4(n: usize, get: impl Fn(usize, usize, usize, usize) -> f64) -> Vec<Vec<Vec<Vec<f64>>>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| (0..n).map(|l| get(i, j, k, l)).collect())
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn parse_kind<T: serde::de::DeserializeOwned>(label: &str, s: &str) -> PyResult<T> {
    serde_json::from_value(Value::String(s.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown {}: {:?}", label, s)))
}

fn plan(count: usize, seed: u64, fiber_floor: f64) -> SamplePlan {
    SamplePlan {
        count,
        seed,
        fiber_floor,
    }
}

/// A Finsler metric on a box chart, built from a JSON spec.
#[pyclass(name = "Metric", frozen)]
struct PyMetric {
    model: MetricModel,
}

#[pymethods]
impl PyMetric {
    /// Builds the metric from the same JSON object the CLI accepts under
    /// the "metric" key.
    #[new]
    fn new(spec_json: &str) -> PyResult<Self> {
        let spec: MetricSpec = serde_json::from_str(spec_json)
            .map_err(|e| PyValueError::new_err(format!("invalid metric spec: {}", e)))?;
        let model = build_metric(&spec).map_err(err_to_py)?;
        Ok(PyMetric { model })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.model.n
    }

    /// F(x, y).
    fn norm(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        let pt = ModelPoint::with_degree(&self.model, &x, &y, 2).map_err(err_to_py)?;
        Ok(pt.f_value())
    }

    /// (g_ij, g^ij) at (x, y).
    fn fundamental_tensor(
        &self,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let (g, ginv) = fundamental_tensor(&self.model, &x, &y).map_err(err_to_py)?;
        let n = self.model.n;
        Ok((nested2(n, |i, j| g.get(i, j)), nested2(n, |i, j| ginv.get(i, j))))
    }

    /// Angular metric h_ij at (x, y).
    fn angular_metric(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let h = angular_metric(&self.model, &x, &y).map_err(err_to_py)?;
        Ok(nested2(self.model.n, |i, j| h.get(i, j)))
    }

    /// Cartan tensor C_ijk at (x, y).
    fn cartan_tensor(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let c = cartan_tensor(&self.model, &x, &y).map_err(err_to_py)?;
        Ok(nested3(self.model.n, |i, j, k| c.get(i, j, k)))
    }

    /// (mean Cartan I_i, Matsumoto torsion M_ijk) at (x, y).
    fn matsumoto_torsion(
        &self,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> PyResult<(Vec<f64>, Vec<Vec<Vec<f64>>>)> {
        let (i_vec, m_t) = matsumoto_torsion(&self.model, &x, &y).map_err(err_to_py)?;
        let n = self.model.n;
        Ok((
            (0..n).map(|i| i_vec.get(i)).collect(),
            nested3(n, |i, j, k| m_t.get(i, j, k)),
        ))
    }

    /// (spray G^i, nonlinear connection N^i_j) at (x, y).
    fn spray(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let s = spray_coefficients(&self.model, &x, &y).map_err(err_to_py)?;
        let n = self.model.n;
        Ok((s.g.clone(), nested2(n, |i, j| s.n_mat.get(i, j))))
    }

    /// (Landsberg L_ijk, mean Landsberg J_i, L-bar tensor) at (x, y).
    fn landsberg(
        &self,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> PyResult<(Vec<Vec<Vec<f64>>>, Vec<f64>, Vec<Vec<Vec<f64>>>)> {
        let suite = landsberg_suite(&self.model, &x, &y).map_err(err_to_py)?;
        let n = self.model.n;
        Ok((
            nested3(n, |i, j, k| suite.l.get(i, j, k)),
            (0..n).map(|i| suite.j.get(i)).collect(),
            nested3(n, |i, j, k| suite.lbar.get(i, j, k)),
        ))
    }

    /// Flag curvature K(x, y; v).
    fn flag_curvature(&self, x: Vec<f64>, y: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
        flag_curvature(&self.model, &x, &y, &v).map_err(err_to_py)
    }

    /// One of the five named connections, optionally followed by a chain
    /// of processes applied in order.
    #[pyo3(signature = (base, processes = vec![]))]
    fn connection(&self, base: &str, processes: Vec<String>) -> PyResult<PyConnection> {
        let kind: ConnectionKind = parse_kind("connection", base)?;
        let mut conn = build_connection(&self.model, kind).map_err(err_to_py)?;
        for p in &processes {
            let pk: ProcessKind = parse_kind("process", p)?;
            conn = apply_process(&conn, pk);
        }
        Ok(PyConnection { inner: conn })
    }

    /// Vanishing-tensor classification report as a dict.
    #[pyo3(signature = (count = 20, seed = 1, tolerance = None))]
    fn classify(&self, py: Python<'_>, count: usize, seed: u64, tolerance: Option<f64>) -> PyResult<Py<PyAny>> {
        let report = classify_metric_with_tolerance(
            &self.model,
            &plan(count, seed, self.model.fiber_floor),
            tolerance.unwrap_or(CLASSIFY_TOLERANCE),
        )
        .map_err(err_to_py)?;
        serialize_to_py(py, &report)
    }

    /// Verifies the curvature-delta identities for one (base, process)
    /// pair; returns the delta report as a dict.
    #[pyo3(signature = (base, process, count = 20, seed = 1))]
    fn verify(
        &self,
        py: Python<'_>,
        base: &str,
        process: &str,
        count: usize,
        seed: u64,
    ) -> PyResult<Py<PyAny>> {
        let b: ConnectionKind = parse_kind("connection", base)?;
        let p: ProcessKind = parse_kind("process", process)?;
        let report =
            verify_process_identities(&self.model, b, p, &plan(count, seed, self.model.fiber_floor))
                .map_err(err_to_py)?;
        serialize_to_py(py, &report)
    }

    /// Integrates the geodesic from (x0, y0) and returns a dict with the
    /// sampled times, positions and velocities.
    fn geodesic(
        &self,
        py: Python<'_>,
        x0: Vec<f64>,
        y0: Vec<f64>,
        duration: f64,
        steps: usize,
    ) -> PyResult<Py<PyAny>> {
        let traj =
            integrate_geodesic(&self.model, &x0, &y0, duration, steps).map_err(err_to_py)?;
        let value = serde_json::json!({
            "t": traj.t,
            "x": traj.x,
            "v": traj.v,
            "step": traj.step,
            "order": traj.order,
        });
        json_to_py(py, &value)
    }
}

/// A linear Finsler connection (horizontal and vertical coefficients over
/// a fixed nonlinear connection).
#[pyclass(name = "Connection", frozen)]
struct PyConnection {
    inner: FinslerConnection,
}

#[pymethods]
impl PyConnection {
    #[getter]
    fn name(&self) -> String {
        self.inner.name()
    }

    /// (H^i_jk, V^i_jk) at (x, y).
    fn coefficients(
        &self,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> PyResult<(Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>)> {
        let (h, v) = connection_coefficients(&self.inner, &x, &y).map_err(err_to_py)?;
        let n = self.inner.model.n;
        Ok((
            nested3(n, |i, j, k| h.get(&[i, j, k])),
            nested3(n, |i, j, k| v.get(&[i, j, k])),
        ))
    }

    /// (horizontal torsion S^i_jk, mixed torsion T^i_jk) at (x, y).
    fn torsion(
        &self,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> PyResult<(Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>)> {
        let t = torsion_components(&self.inner, &x, &y).map_err(err_to_py)?;
        let n = self.inner.model.n;
        Ok((
            nested3(n, |i, j, k| t.s.get(&[i, j, k])),
            nested3(n, |i, j, k| t.t.get(&[i, j, k])),
        ))
    }

    /// Curvature triple as a dict {"r", "p", "q", "frame"} with rank-4
    /// nested lists indexed [section j][output i][slot k][slot l].
    fn curvature(&self, py: Python<'_>, x: Vec<f64>, y: Vec<f64>) -> PyResult<Py<PyAny>> {
        let triple = curvature_triple(&self.inner, &x, &y).map_err(err_to_py)?;
        let n = self.inner.model.n;
        let value = serde_json::json!({
            "r": nested4(n, |j, i, k, l| triple.r.get(j, i, k, l)),
            "p": nested4(n, |j, i, k, l| triple.p.get(j, i, k, l)),
            "q": nested4(n, |j, i, k, l| triple.q.get(j, i, k, l)),
            "frame": triple.frame,
        });
        json_to_py(py, &value)
    }
}

#[pymodule]
fn finslerlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMetric>()?;
    m.add_class::<PyConnection>()?;
    m.add("CONNECTIONS", ConnectionKind::ALL.map(|k| k.name()).to_vec())?;
    m.add("PROCESSES", ProcessKind::ALL.map(|k| k.name()).to_vec())?;
    Ok(())
}
