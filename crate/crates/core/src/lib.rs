//! Aggregating sampled graphs into a single graph by minimum description
//! length, plus the metrics, tuning, and synthetic benchmarks around it.

pub mod aggregate;
pub mod canonical;
pub mod graph;
pub mod metrics;
pub mod pipeline;
pub mod sample_io;
pub mod solver;
pub mod synth;
pub mod tuner;

pub use aggregate::{aggregate, AggregateError, AggregationConfig, Variant};
pub use graph::{Edge, Graph, GraphError, Node, NodeId, Span};
pub use sample_io::SampleSet;
