use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;

/// The T graph samples drawn for one input, after parse failures were dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<Graph>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejects: Vec<Reject>,
    #[serde(default)]
    pub source: SampleSource,
}

/// A sample that could not be turned into a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

impl SampleSet {
    pub fn new(samples: Vec<Graph>) -> Self {
        Self { samples, ..Self::default() }
    }

    /// Number of usable samples; rejected samples do not count.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum SampleIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Schema { path: PathBuf, line: usize, column: usize, message: String },
}

impl SampleIoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    fn schema(path: &Path, err: &serde_json::Error) -> Self {
        Self::Schema {
            path: path.to_path_buf(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    fn invalid(path: &Path, field: String, message: String) -> Self {
        Self::Schema { path: path.to_path_buf(), line: 0, column: 0, message: format!("{field}: {message}") }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, SampleIoError> {
    let text = fs::read_to_string(path).map_err(|e| SampleIoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| SampleIoError::schema(path, &e))
}

fn check_graph(path: &Path, field: &str, g: &Graph) -> Result<(), SampleIoError> {
    g.validate().map_err(|e| SampleIoError::invalid(path, field.to_string(), e.to_string()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SampleFile {
    Set(SampleSet),
    Bare(Vec<Graph>),
}

/// Reads a sample file: either `{"samples": [...], ...}` or a bare array of graphs.
pub fn read_samples(path: impl AsRef<Path>) -> Result<SampleSet, SampleIoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SampleIoError::io(path, e))?;
    // Untagged enums swallow field diagnostics, so try the canonical shape first.
    let set = match serde_json::from_str::<SampleSet>(&text) {
        Ok(set) => set,
        Err(obj_err) => match serde_json::from_str::<SampleFile>(&text) {
            Ok(SampleFile::Bare(samples)) => SampleSet::new(samples),
            Ok(SampleFile::Set(set)) => set,
            Err(_) => return Err(SampleIoError::schema(path, &obj_err)),
        },
    };
    for (i, g) in set.samples.iter().enumerate() {
        check_graph(path, &format!("samples[{i}]"), g)?;
    }
    Ok(set)
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<Graph, SampleIoError> {
    let path = path.as_ref();
    let g: Graph = read_json(path)?;
    check_graph(path, "graph", &g)?;
    Ok(g)
}

/// Reads either a single graph or a JSON array of graphs.
pub fn read_graphs(path: impl AsRef<Path>) -> Result<Vec<Graph>, SampleIoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SampleIoError::io(path, e))?;
    let graphs = if text.trim_start().starts_with('[') {
        serde_json::from_str::<Vec<Graph>>(&text).map_err(|e| SampleIoError::schema(path, &e))?
    } else {
        vec![serde_json::from_str::<Graph>(&text).map_err(|e| SampleIoError::schema(path, &e))?]
    };
    for (i, g) in graphs.iter().enumerate() {
        check_graph(path, &format!("graphs[{i}]"), g)?;
    }
    Ok(graphs)
}

pub fn graph_to_json(g: &Graph) -> String {
    let mut s = serde_json::to_string_pretty(g).expect("graph serialization is infallible");
    s.push('\n');
    s
}

pub fn write_graph(g: &Graph, path: impl AsRef<Path>) -> Result<(), SampleIoError> {
    let path = path.as_ref();
    fs::write(path, graph_to_json(g)).map_err(|e| SampleIoError::io(path, e))
}

pub fn write_samples(set: &SampleSet, path: impl AsRef<Path>) -> Result<(), SampleIoError> {
    write_json(set, path)
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), SampleIoError> {
    let path = path.as_ref();
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    fs::write(path, s).map_err(|e| SampleIoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag5() -> Graph {
        let mut g = Graph::new();
        let ids: Vec<_> = (0..5).map(|i| g.add_node(format!("step {i}"), "step")).collect();
        g.add_edge(ids[0], ids[1], "before");
        g.add_edge(ids[0], ids[2], "before");
        g.add_edge(ids[2], ids[3], "before");
        g.add_edge(ids[3], ids[4], "before");
        g.meta.insert("goal".into(), "bake a cake".into());
        g
    }

    #[test]
    fn roundtrip_five_node_dag() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        let g = dag5();
        write_graph(&g, &path).unwrap();
        assert_eq!(read_graph(&path).unwrap(), g);
    }

    #[test]
    fn field_order_is_stable() {
        let text = graph_to_json(&dag5());
        let nodes = text.find("\"nodes\"").unwrap();
        let edges = text.find("\"edges\"").unwrap();
        let meta = text.find("\"meta\"").unwrap();
        assert!(nodes < edges && edges < meta);
        let id = text.find("\"id\"").unwrap();
        let content = text.find("\"content\"").unwrap();
        let ty = text.find("\"type\"").unwrap();
        assert!(id < content && content < ty);
    }

    #[test]
    fn missing_edges_field_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"nodes": [{"id": 0, "content": "a", "type": "t"}]}"#).unwrap();
        let err = read_graph(&path).unwrap_err();
        match err {
            SampleIoError::Schema { message, line, .. } => {
                assert!(message.contains("edges"), "{message}");
                assert!(line >= 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_edge_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(
            &path,
            r#"{"nodes": [{"id": 0, "content": "a", "type": "t"}], "edges": [{"head": 0, "tail": 3, "type": "r"}]}"#,
        )
        .unwrap();
        assert!(matches!(read_graph(&path), Err(SampleIoError::Schema { .. })));
    }

    #[test]
    fn ten_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        let set = SampleSet::new(vec![dag5(); 10]);
        write_samples(&set, &path).unwrap();
        let back = read_samples(&path).unwrap();
        assert_eq!(back.len(), 10);
        assert_eq!(back, set);

        std::fs::write(&path, serde_json::to_string(&vec![dag5(); 3]).unwrap()).unwrap();
        assert_eq!(read_samples(&path).unwrap().len(), 3);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_samples("/definitely/not/here.json").unwrap_err();
        assert!(matches!(err, SampleIoError::Io { .. }));
    }
}
