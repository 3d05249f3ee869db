//! Architecture descriptions and exact parameter counting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::NUM_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cnn,
    Gnn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputSpec {
    /// Channel-first grid; `dims` are spatial extents, x first (2 or 3 entries).
    Grid {
        channels: usize,
        dims: Vec<usize>,
    },
    Graph {
        features: usize,
        pseudo_dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// `kernel` is `[kx, ky]`.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 2],
    },
    /// `kernel` is `[kx, ky, kz]`.
    Conv3d {
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 3],
    },
    MaxPool2d {
        size: usize,
    },
    MaxPool3d {
        size: usize,
    },
    Relu,
    Elu,
    Dense {
        inputs: usize,
        outputs: usize,
    },
    SplineConv {
        in_channels: usize,
        out_channels: usize,
        kernel: Vec<usize>,
    },
    GlobalMeanPool,
    Softmax,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Conv3d { .. } => "conv3d",
            LayerSpec::MaxPool2d { .. } => "maxpool2d",
            LayerSpec::MaxPool3d { .. } => "maxpool3d",
            LayerSpec::Relu => "relu",
            LayerSpec::Elu => "elu",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::SplineConv { .. } => "splineconv",
            LayerSpec::GlobalMeanPool => "global_mean_pool",
            LayerSpec::Softmax => "softmax",
        }
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        match self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
            } => in_channels * out_channels * kernel.iter().product::<usize>() + out_channels,
            LayerSpec::Conv3d {
                in_channels,
                out_channels,
                kernel,
            } => in_channels * out_channels * kernel.iter().product::<usize>() + out_channels,
            LayerSpec::Dense { inputs, outputs } => inputs * outputs + outputs,
            LayerSpec::SplineConv {
                in_channels,
                out_channels,
                kernel,
            } => {
                in_channels * out_channels * kernel.iter().product::<usize>()
                    + in_channels * out_channels
                    + out_channels
            }
            _ => 0,
        }
    }
}

/// Activation shape flowing between layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    /// `dims` is `[x, y, z]`; 2D grids have `z == 1` and `ndim == 2`.
    Grid {
        channels: usize,
        dims: [usize; 3],
        ndim: usize,
    },
    Nodes {
        features: usize,
    },
    Vector(usize),
}

impl Shape {
    pub fn flat_len(&self) -> Option<usize> {
        match self {
            Shape::Grid { channels, dims, .. } => Some(channels * dims.iter().product::<usize>()),
            Shape::Vector(n) => Some(*n),
            Shape::Nodes { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input: InputSpec,
    pub layers: Vec<LayerSpec>,
    /// Standardization applied to the raw input before the first layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_norm: Option<InputNorm>,
}

/// Per-channel (grid) or per-feature (graph) `(x - mean) / std`. Not trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl InputNorm {
    /// Statistics over rows of `width` values; near-constant columns keep std 1.
    pub fn fit<'a>(width: usize, rows: impl IntoIterator<Item = &'a [f32]>) -> Result<Self> {
        let mut sum = vec![0f64; width];
        let mut sq = vec![0f64; width];
        let mut n = 0usize;
        for r in rows {
            if r.len() != width {
                return Err(Error::Shape(format!(
                    "row of {} values, expected {width}",
                    r.len()
                )));
            }
            n += 1;
            for (k, &v) in r.iter().enumerate() {
                sum[k] += v as f64;
                sq[k] += (v as f64) * (v as f64);
            }
        }
        if n == 0 {
            return Err(Error::param("no rows to fit a normalization on"));
        }
        let n = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = (0..width)
            .map(|k| {
                let sd = (sq[k] / n - mean[k] * mean[k]).max(0.0).sqrt();
                if sd > 1e-6 {
                    sd as f32
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self {
            mean: mean.into_iter().map(|m| m as f32).collect(),
            std,
        })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub per_layer: Vec<usize>,
    pub total: usize,
}

fn conv_out(layer: usize, dims: [usize; 3], kernel: [usize; 3]) -> Result<[usize; 3]> {
    let mut out = [0; 3];
    for a in 0..3 {
        if kernel[a] == 0 || kernel[a] > dims[a] {
            return Err(Error::Shape(format!(
                "layer {layer}: kernel {kernel:?} does not fit input {dims:?}"
            )));
        }
        out[a] = dims[a] - kernel[a] + 1;
    }
    Ok(out)
}

fn pool_out(layer: usize, dims: [usize; 3], size: [usize; 3]) -> Result<[usize; 3]> {
    let mut out = [0; 3];
    for a in 0..3 {
        if size[a] == 0 || dims[a] < size[a] {
            return Err(Error::Shape(format!(
                "layer {layer}: pool {size:?} larger than input {dims:?}"
            )));
        }
        out[a] = dims[a] / size[a];
    }
    Ok(out)
}

impl ModelSpec {
    pub fn input_shape(&self) -> Result<Shape> {
        match &self.input {
            InputSpec::Grid { channels, dims } => {
                let ndim = dims.len();
                if !(2..=3).contains(&ndim) || *channels == 0 || dims.contains(&0) {
                    return Err(Error::Spec(format!("bad grid input {channels}×{dims:?}")));
                }
                Ok(Shape::Grid {
                    channels: *channels,
                    dims: [dims[0], dims[1], dims.get(2).copied().unwrap_or(1)],
                    ndim,
                })
            }
            InputSpec::Graph {
                features,
                pseudo_dim,
            } => {
                if *features == 0 || *pseudo_dim == 0 {
                    return Err(Error::Spec(
                        "graph input needs features and pseudo dims".into(),
                    ));
                }
                Ok(Shape::Nodes {
                    features: *features,
                })
            }
        }
    }

    /// Output shape of every layer, validating compatibility.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let out = self.propagate()?;
        if !matches!(self.layers.last(), Some(LayerSpec::Softmax)) {
            return Err(Error::Spec("model must end with softmax".into()));
        }
        if out.last() != Some(&Shape::Vector(NUM_CLASSES)) {
            return Err(Error::Spec(format!(
                "model must emit {NUM_CLASSES} class scores, emits {:?}",
                out.last()
            )));
        }
        Ok(out)
    }

    fn propagate(&self) -> Result<Vec<Shape>> {
        let width = match (&self.kind, &self.input) {
            (ModelKind::Cnn, InputSpec::Grid { channels, .. }) => *channels,
            (ModelKind::Gnn, InputSpec::Graph { features, .. }) => *features,
            _ => return Err(Error::Spec("model kind does not match input type".into())),
        };
        if let Some(n) = &self.input_norm {
            if n.mean.len() != width || n.std.len() != width {
                return Err(Error::Spec(format!(
                    "input normalization must have {width} entries"
                )));
            }
            if n.mean.iter().chain(&n.std).any(|v| !v.is_finite())
                || n.std.iter().any(|&s| s <= 0.0)
            {
                return Err(Error::Spec(
                    "input normalization needs finite values and positive std".into(),
                ));
            }
        }
        let mut shape = self.input_shape()?;
        let mut out = Vec::with_capacity(self.layers.len());
        for (li, layer) in self.layers.iter().enumerate() {
            let bad = |msg: String| Error::Spec(format!("layer {li} ({}): {msg}", layer.name()));
            shape = match (layer, &shape) {
                (
                    LayerSpec::Conv2d {
                        in_channels,
                        out_channels,
                        kernel,
                    },
                    Shape::Grid {
                        channels,
                        dims,
                        ndim: 2,
                    },
                ) if in_channels == channels && *out_channels > 0 => Shape::Grid {
                    channels: *out_channels,
                    dims: conv_out(li, *dims, [kernel[0], kernel[1], 1])?,
                    ndim: 2,
                },
                (
                    LayerSpec::Conv3d {
                        in_channels,
                        out_channels,
                        kernel,
                    },
                    Shape::Grid {
                        channels,
                        dims,
                        ndim: 3,
                    },
                ) if in_channels == channels && *out_channels > 0 => Shape::Grid {
                    channels: *out_channels,
                    dims: conv_out(li, *dims, *kernel)?,
                    ndim: 3,
                },
                (
                    LayerSpec::MaxPool2d { size },
                    Shape::Grid {
                        channels,
                        dims,
                        ndim: 2,
                    },
                ) => Shape::Grid {
                    channels: *channels,
                    dims: pool_out(li, *dims, [*size, *size, 1])?,
                    ndim: 2,
                },
                (
                    LayerSpec::MaxPool3d { size },
                    Shape::Grid {
                        channels,
                        dims,
                        ndim: 3,
                    },
                ) => Shape::Grid {
                    channels: *channels,
                    dims: pool_out(li, *dims, [*size; 3])?,
                    ndim: 3,
                },
                (LayerSpec::Relu | LayerSpec::Elu, s) => s.clone(),
                (LayerSpec::Dense { inputs, outputs }, s) if s.flat_len() == Some(*inputs) => {
                    if *outputs == 0 {
                        return Err(bad("zero outputs".into()));
                    }
                    Shape::Vector(*outputs)
                }
                (
                    LayerSpec::SplineConv {
                        in_channels,
                        out_channels,
                        kernel,
                    },
                    Shape::Nodes { features },
                ) if in_channels == features => {
                    let InputSpec::Graph { pseudo_dim, .. } = &self.input else {
                        unreachable!()
                    };
                    if kernel.len() != *pseudo_dim || kernel.iter().any(|&k| k < 2) {
                        return Err(bad(format!(
                            "kernel {kernel:?} must have {pseudo_dim} entries >= 2"
                        )));
                    }
                    if *out_channels == 0 {
                        return Err(bad("zero outputs".into()));
                    }
                    Shape::Nodes {
                        features: *out_channels,
                    }
                }
                (LayerSpec::GlobalMeanPool, Shape::Nodes { features }) => Shape::Vector(*features),
                (LayerSpec::Softmax, Shape::Vector(n)) if li + 1 == self.layers.len() => {
                    Shape::Vector(*n)
                }
                (_, s) => return Err(bad(format!("incompatible with input shape {s:?}"))),
            };
            out.push(shape.clone());
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    /// Baseline CNN: two conv + ReLU + 2× max-pool stages, dense 128, dense 7.
    pub fn default_cnn(channels: usize, dims: &[usize]) -> Result<Self> {
        let conv = |cin: usize, cout: usize| match dims.len() {
            2 => Ok(LayerSpec::Conv2d {
                in_channels: cin,
                out_channels: cout,
                kernel: [3, 3],
            }),
            3 => Ok(LayerSpec::Conv3d {
                in_channels: cin,
                out_channels: cout,
                kernel: [3, 3, 3],
            }),
            n => Err(Error::Spec(format!("CNN input must be 2D or 3D, got {n}D"))),
        };
        let pool = if dims.len() == 2 {
            LayerSpec::MaxPool2d { size: 2 }
        } else {
            LayerSpec::MaxPool3d { size: 2 }
        };
        let mut spec = ModelSpec {
            kind: ModelKind::Cnn,
            input: InputSpec::Grid {
                channels,
                dims: dims.to_vec(),
            },
            layers: vec![
                conv(channels, 8)?,
                LayerSpec::Relu,
                pool.clone(),
                conv(8, 16)?,
                LayerSpec::Relu,
                pool,
            ],
            input_norm: None,
        };
        // Flattened width after the feature extractor.
        let s = spec.propagate()?.pop().expect("non-empty");
        let flat = s.flat_len().expect("grid shape");
        spec.layers.extend([
            LayerSpec::Dense {
                inputs: flat,
                outputs: 128,
            },
            LayerSpec::Relu,
            LayerSpec::Dense {
                inputs: 128,
                outputs: NUM_CLASSES,
            },
            LayerSpec::Softmax,
        ]);
        spec.validate()?;
        Ok(spec)
    }

    /// Compact spline GNN: two spline convolutions (32, 64 channels, kernel
    /// size 3 per pseudo dim) with ELU, global mean pooling, dense 64, dense 7.
    pub fn default_gnn(features: usize, pseudo_dim: usize) -> Result<Self> {
        let kernel = vec![3; pseudo_dim];
        let spec = ModelSpec {
            kind: ModelKind::Gnn,
            input: InputSpec::Graph {
                features,
                pseudo_dim,
            },
            layers: vec![
                LayerSpec::SplineConv {
                    in_channels: features,
                    out_channels: 32,
                    kernel: kernel.clone(),
                },
                LayerSpec::Elu,
                LayerSpec::SplineConv {
                    in_channels: 32,
                    out_channels: 64,
                    kernel,
                },
                LayerSpec::Elu,
                LayerSpec::GlobalMeanPool,
                LayerSpec::Dense {
                    inputs: 64,
                    outputs: 64,
                },
                LayerSpec::Elu,
                LayerSpec::Dense {
                    inputs: 64,
                    outputs: NUM_CLASSES,
                },
                LayerSpec::Softmax,
            ],
            input_norm: None,
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn param_count(spec: &ModelSpec) -> Result<ParamCount> {
    spec.validate()?;
    let per_layer: Vec<usize> = spec.layers.iter().map(LayerSpec::param_count).collect();
    Ok(ParamCount {
        total: per_layer.iter().sum(),
        per_layer,
    })
}
