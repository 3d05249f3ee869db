//! Shared fixtures for the criterion benchmarks.

use volgraph_core::graph::{encode_graph, EncodeConfig};
use volgraph_core::neural::GraphInput;
use volgraph_core::segmentation::GridRef;
use volgraph_core::synth::{synth_generate, SynthConfig};
use volgraph_core::{ClassLabel, Domain, Input, MapVariant, Sample};

/// One healthy sample at `dims`.
pub fn sample(dims: [usize; 3]) -> Sample {
    let cfg = SynthConfig::default().with_dims(dims);
    synth_generate(&cfg, ClassLabel::Dmn, Domain::Healthy, MapVariant::Full, 42)
        .expect("synthetic sample")
}

/// The default supervoxel graph of [`sample`].
pub fn graph_input(dims: [usize; 3]) -> Input<f32> {
    let s = sample(dims);
    let g = encode_graph(GridRef::from(&s.volume), s.label, &EncodeConfig::default())
        .expect("encodable sample");
    Input::Graph(GraphInput::from(&g))
}

pub fn grid_input(s: &Sample) -> Input<f32> {
    Input::Grid {
        channels: 1,
        dims: s.volume.dims(),
        ndim: 3,
        data: s.volume.data().to_vec(),
    }
}
