//! Neural primitives with hand-derived gradients: dense and convolution
//! layers for the grid baseline, spline-basis graph convolution with global
//! pooling for the graph model, softmax cross-entropy and exact parameter
//! counting.

mod checkpoint;
mod layers;
mod model;
mod spec;
mod spline;

use std::fmt::Debug;
use std::iter::Sum;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};
pub use layers::{
    conv_backward, conv_forward, dense_backward, dense_forward, maxpool_backward, maxpool_forward,
    softmax, softmax_cross_entropy, ConvGeometry,
};
pub use model::{GraphInput, Input, Model, Reduction};
pub use spec::{
    param_count, InputNorm, InputSpec, LayerSpec, ModelKind, ModelSpec, ParamCount, Shape,
};
pub use spline::{
    bspline_basis, clamped_pseudo_count, global_mean_pool, spline_conv_backward,
    spline_conv_forward, SplineBasis, SplineCache, SplineGeometry,
};

/// Floating-point element type: `f32` for training, `f64` for gradient checks.
pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + Send + Sync + Debug + Default + Sum + 'static
{
    fn of(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).expect("finite conversion")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
