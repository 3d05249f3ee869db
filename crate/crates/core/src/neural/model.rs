use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::layers::{
    conv_backward, conv_forward, dense_backward, dense_forward, maxpool_backward, maxpool_forward,
    softmax, softmax_cross_entropy, ConvGeometry,
};
use super::spec::{param_count, LayerSpec, ModelSpec, Shape};
use super::spline::{
    global_mean_pool, spline_conv_backward, spline_conv_forward, SplineCache, SplineGeometry,
};
use super::Scalar;
use crate::error::{Error, Result};
use crate::graph::RegionGraph;

/// Graph sample in the layout the spline layers consume.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput<T> {
    pub nodes: usize,
    pub feature_dim: usize,
    pub features: Vec<T>,
    pub edges: Vec<(u32, u32)>,
    pub pseudo_dim: usize,
    pub pseudo: Vec<T>,
}

impl From<&RegionGraph> for GraphInput<f32> {
    fn from(g: &RegionGraph) -> Self {
        GraphInput {
            nodes: g.nodes,
            feature_dim: g.feature_dim,
            features: g.features.clone(),
            edges: g.edges.clone(),
            pseudo_dim: g.pseudo_dim,
            pseudo: g.pseudo.clone(),
        }
    }
}

/// One network input: a channel-first grid or a graph.
#[derive(Debug, Clone, PartialEq)]
pub enum Input<T> {
    Grid {
        channels: usize,
        /// `[x, y, z]`, `z == 1` for 2D.
        dims: [usize; 3],
        ndim: usize,
        data: Vec<T>,
    },
    Graph(GraphInput<T>),
}

impl<T: Scalar> Input<T> {
    pub fn cast<U: Scalar>(&self) -> Input<U> {
        let conv = |v: &[T]| v.iter().map(|&x| U::of(x.as_f64())).collect();
        match self {
            Input::Grid {
                channels,
                dims,
                ndim,
                data,
            } => Input::Grid {
                channels: *channels,
                dims: *dims,
                ndim: *ndim,
                data: conv(data),
            },
            Input::Graph(g) => Input::Graph(GraphInput {
                nodes: g.nodes,
                feature_dim: g.feature_dim,
                features: conv(&g.features),
                edges: g.edges.clone(),
                pseudo_dim: g.pseudo_dim,
                pseudo: conv(&g.pseudo),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    Sum,
}

enum Aux<T> {
    None,
    Pool(Vec<u32>),
    Spline(SplineCache<T>),
}

struct Trace<T> {
    /// Input activation of every layer.
    inputs: Vec<Vec<T>>,
    aux: Vec<Aux<T>>,
    logits: Vec<T>,
}

/// A network: its spec plus one flat parameter vector, laid out layer by
/// layer in spec order.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    spec: ModelSpec,
    shapes: Vec<Shape>,
    offsets: Vec<usize>,
    params: Vec<T>,
}

impl<T: Scalar> Model<T> {
    /// All-zero parameters.
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let shapes = spec.shapes()?;
        let counts = param_count(&spec)?;
        let mut offsets = vec![0];
        for c in &counts.per_layer {
            offsets.push(offsets.last().unwrap() + c);
        }
        Ok(Self {
            spec,
            shapes,
            offsets,
            params: vec![T::zero(); counts.total],
        })
    }

    /// He-uniform weights, zero biases, seeded.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut m = Self::new(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for li in 0..m.spec.layers.len() {
            let range = m.offsets[li]..m.offsets[li + 1];
            let block = &mut m.params[range];
            let mut fill = |block: &mut [T], fan_in: usize| {
                let a = (6.0 / fan_in.max(1) as f64).sqrt();
                for v in block {
                    *v = T::of(rng.gen_range(-a..a));
                }
            };
            match &m.spec.layers[li] {
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                } => {
                    let k: usize = kernel.iter().product();
                    fill(
                        &mut block[..in_channels * out_channels * k],
                        in_channels * k,
                    );
                }
                LayerSpec::Conv3d {
                    in_channels,
                    out_channels,
                    kernel,
                } => {
                    let k: usize = kernel.iter().product();
                    fill(
                        &mut block[..in_channels * out_channels * k],
                        in_channels * k,
                    );
                }
                LayerSpec::Dense { inputs, outputs } => {
                    fill(&mut block[..inputs * outputs], *inputs);
                }
                LayerSpec::SplineConv {
                    in_channels,
                    out_channels,
                    kernel,
                } => {
                    let k: usize = kernel.iter().product();
                    let n = in_channels * out_channels * (k + 1);
                    fill(&mut block[..n], 2 * in_channels);
                }
                _ => {}
            }
        }
        Ok(m)
    }

    pub fn from_params(spec: ModelSpec, params: Vec<T>) -> Result<Self> {
        let mut m = Self::new(spec)?;
        if params.len() != m.params.len() {
            return Err(Error::Spec(format!(
                "spec needs {} parameters, got {}",
                m.params.len(),
                params.len()
            )));
        }
        m.params = params;
        Ok(m)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_len(&self) -> usize {
        self.params.len()
    }

    pub fn layer_range(&self, layer: usize) -> std::ops::Range<usize> {
        self.offsets[layer]..self.offsets[layer + 1]
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            shapes: self.shapes.clone(),
            offsets: self.offsets.clone(),
            params: self.params.iter().map(|&v| U::of(v.as_f64())).collect(),
        }
    }

    fn check_input(&self, input: &Input<T>) -> Result<()> {
        let expect = self.spec.input_shape()?;
        match (input, &expect) {
            (
                Input::Grid {
                    channels,
                    dims,
                    ndim,
                    data,
                },
                Shape::Grid {
                    channels: c,
                    dims: d,
                    ndim: n,
                },
            ) if channels == c && dims == d && ndim == n => {
                if data.len() != channels * dims.iter().product::<usize>() {
                    return Err(Error::Shape("grid data length mismatch".into()));
                }
                Ok(())
            }
            (Input::Graph(g), Shape::Nodes { features }) if g.feature_dim == *features => {
                let crate::neural::InputSpec::Graph { pseudo_dim, .. } = &self.spec.input else {
                    unreachable!()
                };
                if g.pseudo_dim != *pseudo_dim {
                    return Err(Error::Shape(format!(
                        "graph pseudo dim {} but model expects {pseudo_dim}",
                        g.pseudo_dim
                    )));
                }
                if g.features.len() != g.nodes * g.feature_dim
                    || g.pseudo.len() != g.edges.len() * g.pseudo_dim
                {
                    return Err(Error::Shape("graph block sizes mismatch".into()));
                }
                Ok(())
            }
            _ => Err(Error::Shape(format!(
                "input does not match model input {expect:?}"
            ))),
        }
    }

    fn forward(&self, input: &Input<T>, keep: bool) -> Result<Trace<T>> {
        self.check_input(input)?;
        let (mut act, graph) = match input {
            Input::Grid { data, .. } => (data.clone(), None),
            Input::Graph(g) => (g.features.clone(), Some(g)),
        };
        if let Some(norm) = &self.spec.input_norm {
            let w = norm.width();
            let len = act.len();
            let grid = matches!(input, Input::Grid { .. });
            for (i, a) in act.iter_mut().enumerate() {
                let k = if grid { i * w / len } else { i % w };
                *a = (*a - T::of(norm.mean[k] as f64)) / T::of(norm.std[k] as f64);
            }
        }
        let mut shape = self.spec.input_shape()?;
        let mut inputs = Vec::new();
        let mut aux = Vec::new();
        for (li, layer) in self.spec.layers.iter().enumerate() {
            let p = &self.params[self.layer_range(li)];
            let mut a = Aux::None;
            let out = match (layer, &shape) {
                (LayerSpec::Conv2d { .. } | LayerSpec::Conv3d { .. }, Shape::Grid { dims, .. }) => {
                    let g = conv_geometry(layer, *dims);
                    let nw = p.len() - g.out_channels;
                    conv_forward(&g, &p[..nw], &p[nw..], &act)
                }
                (LayerSpec::MaxPool2d { size }, Shape::Grid { channels, dims, .. }) => {
                    let (o, arg) = maxpool_forward(*channels, *dims, [*size, *size, 1], &act);
                    a = Aux::Pool(arg);
                    o
                }
                (LayerSpec::MaxPool3d { size }, Shape::Grid { channels, dims, .. }) => {
                    let (o, arg) = maxpool_forward(*channels, *dims, [*size; 3], &act);
                    a = Aux::Pool(arg);
                    o
                }
                (LayerSpec::Relu, _) => act.iter().map(|&v| v.max(T::zero())).collect(),
                (LayerSpec::Elu, _) => act
                    .iter()
                    .map(|&v| if v > T::zero() { v } else { v.exp_m1() })
                    .collect(),
                (LayerSpec::Dense { outputs, .. }, _) => {
                    let nw = p.len() - outputs;
                    dense_forward(&p[..nw], &p[nw..], &act)
                }
                (
                    LayerSpec::SplineConv {
                        in_channels,
                        out_channels,
                        kernel,
                    },
                    _,
                ) => {
                    let g = graph.expect("graph model");
                    let geom = SplineGeometry {
                        in_channels: *in_channels,
                        out_channels: *out_channels,
                        kernel: kernel.clone(),
                    };
                    let (o, cache) =
                        spline_conv_forward(&geom, p, &act, g.nodes, &g.edges, &g.pseudo)?;
                    a = Aux::Spline(cache);
                    o
                }
                (LayerSpec::GlobalMeanPool, Shape::Nodes { features }) => {
                    global_mean_pool(&act, graph.expect("graph model").nodes, *features)?
                }
                (LayerSpec::Softmax, _) => act.clone(),
                _ => return Err(Error::Internal(format!("layer {li} shape mismatch"))),
            };
            if let Some(bad) = out.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric {
                    layer: li,
                    msg: format!("{} output {bad} is not finite", layer.name()),
                });
            }
            if keep {
                inputs.push(std::mem::replace(&mut act, out));
                aux.push(a);
            } else {
                act = out;
            }
            shape = self.shapes[li].clone();
        }
        Ok(Trace {
            inputs,
            aux,
            logits: act,
        })
    }

    /// Pre-softmax class scores.
    pub fn logits(&self, input: &Input<T>) -> Result<Vec<T>> {
        Ok(self.forward(input, false)?.logits)
    }

    pub fn probabilities(&self, input: &Input<T>) -> Result<Vec<T>> {
        Ok(softmax(&self.logits(input)?))
    }

    /// Arg-max class; ties go to the lower index.
    pub fn predict(&self, input: &Input<T>) -> Result<usize> {
        let l = self.logits(input)?;
        Ok(l.iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            })
            .0)
    }

    /// Cross-entropy loss and its gradient for one sample.
    pub fn loss_and_grad(&self, input: &Input<T>, label: usize) -> Result<(T, Vec<T>)> {
        let trace = self.forward(input, true)?;
        let (loss, dlogits) = softmax_cross_entropy(&trace.logits, label);
        let grads = self.backward(input, &trace, dlogits);
        Ok((loss, grads))
    }

    pub fn loss(&self, input: &Input<T>, label: usize) -> Result<T> {
        Ok(softmax_cross_entropy(&self.logits(input)?, label).0)
    }

    fn backward(&self, input: &Input<T>, trace: &Trace<T>, dlogits: Vec<T>) -> Vec<T> {
        let mut grads = vec![T::zero(); self.params.len()];
        let first_param_layer = (0..self.spec.layers.len())
            .find(|&li| !self.layer_range(li).is_empty())
            .unwrap_or(usize::MAX);
        let graph = match input {
            Input::Graph(g) => Some(g),
            _ => None,
        };
        let mut g = dlogits;
        for li in (0..self.spec.layers.len()).rev() {
            let layer = &self.spec.layers[li];
            let x = &trace.inputs[li];
            let range = self.layer_range(li);
            let p = &self.params[range.clone()];
            let gp = &mut grads[range];
            let want = li > first_param_layer;
            let in_shape = if li == 0 {
                self.spec.input_shape().expect("validated")
            } else {
                self.shapes[li - 1].clone()
            };
            let next = match (layer, &in_shape) {
                (LayerSpec::Conv2d { .. } | LayerSpec::Conv3d { .. }, Shape::Grid { dims, .. }) => {
                    let geo = conv_geometry(layer, *dims);
                    let nw = p.len() - geo.out_channels;
                    let (gw, gb) = gp.split_at_mut(nw);
                    conv_backward(&geo, &p[..nw], x, &g, gw, gb, want)
                }
                (LayerSpec::MaxPool2d { .. } | LayerSpec::MaxPool3d { .. }, _) => {
                    let Aux::Pool(arg) = &trace.aux[li] else {
                        unreachable!()
                    };
                    Some(maxpool_backward(x.len(), arg, &g))
                }
                (LayerSpec::Relu, _) => Some(
                    x.iter()
                        .zip(&g)
                        .map(|(&xv, &gv)| if xv > T::zero() { gv } else { T::zero() })
                        .collect(),
                ),
                (LayerSpec::Elu, _) => Some(
                    x.iter()
                        .zip(&g)
                        .map(|(&xv, &gv)| if xv > T::zero() { gv } else { gv * xv.exp() })
                        .collect(),
                ),
                (LayerSpec::Dense { outputs, .. }, _) => {
                    let nw = p.len() - outputs;
                    let (gw, gb) = gp.split_at_mut(nw);
                    dense_backward(&p[..nw], x, &g, gw, gb, want)
                }
                (
                    LayerSpec::SplineConv {
                        in_channels,
                        out_channels,
                        kernel,
                    },
                    _,
                ) => {
                    let gr = graph.expect("graph model");
                    let Aux::Spline(cache) = &trace.aux[li] else {
                        unreachable!()
                    };
                    let geom = SplineGeometry {
                        in_channels: *in_channels,
                        out_channels: *out_channels,
                        kernel: kernel.clone(),
                    };
                    spline_conv_backward(&geom, p, x, gr.nodes, &gr.edges, cache, &g, gp, want)
                }
                (LayerSpec::GlobalMeanPool, Shape::Nodes { features }) => {
                    let n = graph.expect("graph model").nodes;
                    let inv = T::one() / T::of(n as f64);
                    let row: Vec<T> = g.iter().map(|&v| v * inv).collect();
                    let mut out = Vec::with_capacity(n * features);
                    for _ in 0..n {
                        out.extend_from_slice(&row);
                    }
                    Some(out)
                }
                (LayerSpec::Softmax, _) => Some(g.clone()),
                _ => unreachable!("validated spec"),
            };
            match next {
                Some(n) => g = n,
                None => break,
            }
        }
        grads
    }

    /// Loss and gradient over a batch. Per-sample passes may run in
    /// parallel; accumulation is always in batch order.
    pub fn batch_gradients(
        &self,
        batch: &[(&Input<T>, usize)],
        reduction: Reduction,
    ) -> Result<(T, Vec<T>)> {
        let per: Vec<(T, Vec<T>)> = batch
            .par_iter()
            .map(|(x, y)| self.loss_and_grad(x, *y))
            .collect::<Result<_>>()?;
        let mut loss = T::zero();
        let mut grads = vec![T::zero(); self.params.len()];
        for (l, g) in per {
            loss = loss + l;
            for (a, b) in grads.iter_mut().zip(&g) {
                *a = *a + *b;
            }
        }
        if reduction == Reduction::Mean && !batch.is_empty() {
            let inv = T::one() / T::of(batch.len() as f64);
            loss = loss * inv;
            grads.iter_mut().for_each(|v| *v = *v * inv);
        }
        Ok((loss, grads))
    }
}

fn conv_geometry(layer: &LayerSpec, dims: [usize; 3]) -> ConvGeometry {
    match layer {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
        } => ConvGeometry {
            in_channels: *in_channels,
            out_channels: *out_channels,
            in_dims: dims,
            kernel: [kernel[0], kernel[1], 1],
        },
        LayerSpec::Conv3d {
            in_channels,
            out_channels,
            kernel,
        } => ConvGeometry {
            in_channels: *in_channels,
            out_channels: *out_channels,
            in_dims: dims,
            kernel: *kernel,
        },
        _ => unreachable!(),
    }
}
