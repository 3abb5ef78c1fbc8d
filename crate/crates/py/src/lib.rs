//! Python bindings. Graphs, worlds, configs and reports cross the boundary
//! as their JSON encodings.

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

use scenefuse::alignment::{merge_into, Thresholds};
use scenefuse::codec::{deserialize_graph, message_bytes, serialize_graph};
use scenefuse::geometry::Aabb;
use scenefuse::graph::InstanceId;
use scenefuse::harness::run::stream;
use scenefuse::harness::{run_scenario, stream_rng, ScenarioConfig};
use scenefuse::metrics::{evaluate as eval_graphs, MatchSpec};
use scenefuse::worldsim::{generate_world as gen_world, serialize_world, WorldParams};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("value serializes")
}

/// A 3D semantic scene graph.
#[pyclass(name = "SceneGraph", module = "pyscenefuse")]
struct PySceneGraph {
    inner: scenefuse::graph::SceneGraph,
}

#[pymethods]
impl PySceneGraph {
    #[new]
    #[pyo3(signature = (frame_tag = "world"))]
    fn new(frame_tag: &str) -> Self {
        Self {
            inner: scenefuse::graph::SceneGraph::new(frame_tag),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: deserialize_graph(text.as_bytes()).map_err(value_error)?,
        })
    }

    fn to_json(&self) -> String {
        String::from_utf8(serialize_graph(&self.inner)).expect("canonical encoding is UTF-8")
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn node_ids(&self) -> Vec<u64> {
        self.inner.node_ids().map(|n| n.0).collect()
    }

    fn label(&self, id: u64) -> PyResult<String> {
        self.inner
            .node(InstanceId(id))
            .map(|n| n.label().to_owned())
            .ok_or_else(|| PyKeyError::new_err(id))
    }

    fn neighbors(&self, id: u64) -> PyResult<Vec<u64>> {
        let n = self
            .inner
            .neighbors(InstanceId(id))
            .map_err(|_| PyKeyError::new_err(id))?;
        Ok(n.into_iter().map(|n| n.0).collect())
    }

    /// Size in bytes of the canonical encoding sent between agents.
    fn message_bytes(&self) -> usize {
        message_bytes(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.node_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "SceneGraph(frame_tag={:?}, nodes={}, edges={})",
            self.inner.frame_tag(),
            self.inner.node_count(),
            self.inner.edge_count()
        )
    }
}

#[pyfunction]
fn aabb_iou(a_min: [f64; 3], a_max: [f64; 3], b_min: [f64; 3], b_max: [f64; 3]) -> PyResult<f64> {
    let a = Aabb::new(a_min, a_max).map_err(value_error)?;
    let b = Aabb::new(b_min, b_max).map_err(value_error)?;
    Ok(a.iou(&b))
}

#[pyfunction]
fn f1(recall: f64, precision: f64) -> f64 {
    scenefuse::metrics::f1(recall, precision)
}

/// Merges `query` into `reference`. Returns the merged graph and the
/// alignment report as JSON.
#[pyfunction]
#[pyo3(signature = (query, reference, theta_len = 3, theta_dis = 1.5, theta_bbox = 0.4, max_anchors = 5, seed = 0))]
fn align(
    query: &PySceneGraph,
    reference: &PySceneGraph,
    theta_len: usize,
    theta_dis: f64,
    theta_bbox: f64,
    max_anchors: usize,
    seed: u64,
) -> PyResult<(PySceneGraph, String)> {
    let th = Thresholds {
        theta_len,
        theta_dis,
        theta_bbox,
    };
    let mut rng = stream_rng(seed, &[stream::ALIGNMENT]);
    let (merged, report) =
        merge_into(&query.inner, reference.inner.clone(), &th, max_anchors, &mut rng).map_err(value_error)?;
    Ok((PySceneGraph { inner: merged }, to_json(&report)))
}

/// Gated and ungated scores of `pred` against `gt`, as JSON.
#[pyfunction]
#[pyo3(signature = (pred, gt, k = 1))]
fn evaluate(pred: &PySceneGraph, gt: &PySceneGraph, k: usize) -> PyResult<String> {
    let spec = MatchSpec {
        k,
        ..MatchSpec::default()
    };
    spec.validate().map_err(value_error)?;
    let gated = eval_graphs(&pred.inner, &gt.inner, &spec);
    let ungated = eval_graphs(&pred.inner, &gt.inner, &MatchSpec::ungated(k));
    Ok(to_json(
        &serde_json::json!({ "gated": gated, "ungated": ungated, "k": k }),
    ))
}

/// Generates a ground-truth world and returns its JSON file contents.
#[pyfunction]
#[pyo3(signature = (seed, n_rooms = 47))]
fn generate_world(seed: u64, n_rooms: usize) -> PyResult<String> {
    let params = WorldParams::full_scale().with_rooms(n_rooms);
    let world = gen_world(&params, &mut stream_rng(seed, &[stream::WORLD])).map_err(value_error)?;
    Ok(String::from_utf8(serialize_world(&world)).expect("canonical encoding is UTF-8"))
}

/// Runs the scenario described by a JSON config and returns the run report
/// as JSON.
#[pyfunction]
fn simulate(config_json: &str) -> PyResult<String> {
    let cfg = ScenarioConfig::from_json(config_json.as_bytes()).map_err(value_error)?;
    let run = run_scenario(&cfg).map_err(value_error)?;
    Ok(run.report.to_json())
}

#[pymodule]
fn pyscenefuse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySceneGraph>()?;
    m.add_function(wrap_pyfunction!(aabb_iou, m)?)?;
    m.add_function(wrap_pyfunction!(f1, m)?)?;
    m.add_function(wrap_pyfunction!(align, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_world, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
