//! Volume-to-graph compaction toolkit.
//!
//! Activation volumes are reduced (projections, binarization, SLIC
//! supervoxels), encoded as attributed region graphs and classified either
//! by a grid CNN or by a compact spline-basis graph network. Parameter counts
//! of the two model families are compared exactly.

pub mod container;
pub mod error;
pub mod graph;
pub mod graph_io;
pub mod neural;
pub mod reduction;
pub mod segmentation;
pub mod synth;
pub mod training;
pub mod volume;

pub use error::{Error, Result};
pub use graph::{encode_graph, EncodeConfig, GraphDataset, RegionGraph};
pub use neural::{param_count, Input, Model, ModelSpec, ParamCount};
pub use segmentation::{slic, LabelMap, SlicConfig};
pub use volume::{ClassLabel, Domain, MapVariant, Sample, Volume};
