//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

pub mod suites;

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use volgraph_core::neural::{GraphInput, Input, InputSpec, LayerSpec, Model, ModelKind, ModelSpec};
use volgraph_core::segmentation::{Center, LabelMap};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn coords(i: usize, dims: [usize; 3]) -> [usize; 3] {
    [
        i % dims[0],
        (i / dims[0]) % dims[1],
        i / (dims[0] * dims[1]),
    ]
}

/// Random blocky label map with up to `max_ids` raw ids, compacted.
pub fn random_labels(r: &mut ChaCha8Rng, max_side: usize, ndim: usize, max_ids: u32) -> LabelMap {
    let mut dims = [1usize; 3];
    for d in dims.iter_mut().take(ndim) {
        *d = r.gen_range(1..=max_side);
    }
    let n: usize = dims.iter().product();
    let raw: Vec<u32> = (0..n).map(|_| r.gen_range(0..max_ids)).collect();
    LabelMap::compact(dims, ndim, &raw).unwrap()
}

/// Every pair of elements at Manhattan distance 1 with distinct labels.
pub fn rag_oracle(labels: &LabelMap) -> BTreeSet<(u32, u32)> {
    let dims = labels.dims();
    let l = labels.labels();
    let mut out = BTreeSet::new();
    for i in 0..l.len() {
        for j in i + 1..l.len() {
            let (a, b) = (coords(i, dims), coords(j, dims));
            let manhattan: usize = (0..3).map(|k| a[k].abs_diff(b[k])).sum();
            if manhattan == 1 && l[i] != l[j] {
                out.insert((l[i].min(l[j]), l[i].max(l[j])));
            }
        }
    }
    out
}

/// For each node the `k` others sorted by (distance, id), as edges j→i.
pub fn knn_oracle(points: &[[f64; 3]], k: usize) -> BTreeSet<(u32, u32)> {
    let mut out = BTreeSet::new();
    for i in 0..points.len() {
        let mut others: Vec<(f64, usize)> = (0..points.len())
            .filter(|&j| j != i)
            .map(|j| {
                let d: f64 = (0..3).map(|a| (points[i][a] - points[j][a]).powi(2)).sum();
                (d, j)
            })
            .collect();
        others.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for &(_, j) in others.iter().take(k) {
            out.insert((j as u32, i as u32));
        }
    }
    out
}

/// True when every label id forms exactly one face-connected component.
pub fn all_connected(labels: &LabelMap) -> bool {
    let dims = labels.dims();
    let l = labels.labels();
    let mut seen = vec![false; l.len()];
    let mut started = BTreeSet::new();
    for s in 0..l.len() {
        if seen[s] {
            continue;
        }
        if !started.insert(l[s]) {
            return false;
        }
        let mut q = VecDeque::from([s]);
        seen[s] = true;
        while let Some(i) = q.pop_front() {
            let c = coords(i, dims);
            for a in 0..3 {
                for d in [-1isize, 1] {
                    let v = c[a] as isize + d;
                    if v < 0 || v >= dims[a] as isize {
                        continue;
                    }
                    let mut n = c;
                    n[a] = v as usize;
                    let j = (n[2] * dims[1] + n[1]) * dims[0] + n[0];
                    if !seen[j] && l[j] == l[s] {
                        seen[j] = true;
                        q.push_back(j);
                    }
                }
            }
        }
    }
    true
}

/// Plain k-means in (intensity, scaled position) space with exhaustive
/// assignment, started from `seeds`.
pub fn lloyd_oracle(
    data: &[f32],
    dims: [usize; 3],
    seeds: &[Center],
    spatial_weight: f64,
    iterations: usize,
) -> Vec<Center> {
    let mut centers = seeds.to_vec();
    for _ in 0..iterations {
        let mut acc = vec![[0f64; 5]; centers.len()];
        for (i, &v) in data.iter().enumerate() {
            let p = coords(i, dims);
            let mut best = (f64::INFINITY, 0);
            for (k, c) in centers.iter().enumerate() {
                let ds: f64 = (0..3).map(|a| (p[a] as f64 - c.pos[a]).powi(2)).sum();
                let d = (v as f64 - c.intensity).powi(2) + ds * spatial_weight;
                if d < best.0 {
                    best = (d, k);
                }
            }
            let a = &mut acc[best.1];
            for ax in 0..3 {
                a[ax] += p[ax] as f64;
            }
            a[3] += v as f64;
            a[4] += 1.0;
        }
        for (c, a) in centers.iter_mut().zip(&acc) {
            if a[4] > 0.0 {
                c.pos = [a[0] / a[4], a[1] / a[4], a[2] / a[4]];
                c.intensity = a[3] / a[4];
            }
        }
    }
    centers
}

/// Parameter count from tensors materialized per layer.
pub fn materialized_params(spec: &ModelSpec) -> usize {
    let mut tensors: Vec<Vec<f32>> = Vec::new();
    for layer in &spec.layers {
        let shapes: Vec<Vec<usize>> = match layer {
            LayerSpec::Dense { inputs, outputs } => vec![vec![*outputs, *inputs], vec![*outputs]],
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
            } => vec![
                vec![*out_channels, *in_channels, kernel[1], kernel[0]],
                vec![*out_channels],
            ],
            LayerSpec::Conv3d {
                in_channels,
                out_channels,
                kernel,
            } => vec![
                vec![*out_channels, *in_channels, kernel[2], kernel[1], kernel[0]],
                vec![*out_channels],
            ],
            LayerSpec::SplineConv {
                in_channels,
                out_channels,
                kernel,
            } => {
                let mut w = kernel.clone();
                w.extend([*in_channels, *out_channels]);
                vec![w, vec![*in_channels, *out_channels], vec![*out_channels]]
            }
            _ => vec![],
        };
        for s in shapes {
            let mut t = vec![0f32; 1];
            for d in s {
                t = t.repeat(d);
            }
            tensors.push(t);
        }
    }
    tensors.iter().map(Vec::len).sum()
}

/// A random valid CNN or GNN spec.
pub fn random_spec(r: &mut ChaCha8Rng) -> ModelSpec {
    if r.gen_bool(0.5) {
        let pd = r.gen_range(1..=3);
        let f = r.gen_range(1..=6);
        let h = r.gen_range(1..=12);
        let kernel: Vec<usize> = (0..pd).map(|_| r.gen_range(2..=5)).collect();
        let hidden = r.gen_range(1..=16);
        ModelSpec {
            kind: ModelKind::Gnn,
            input: InputSpec::Graph {
                features: f,
                pseudo_dim: pd,
            },
            layers: vec![
                LayerSpec::SplineConv {
                    in_channels: f,
                    out_channels: h,
                    kernel,
                },
                LayerSpec::Elu,
                LayerSpec::GlobalMeanPool,
                LayerSpec::Dense {
                    inputs: h,
                    outputs: hidden,
                },
                LayerSpec::Elu,
                LayerSpec::Dense {
                    inputs: hidden,
                    outputs: 7,
                },
                LayerSpec::Softmax,
            ],
            input_norm: None,
        }
    } else {
        let ndim = r.gen_range(2..=3);
        let c = r.gen_range(1..=3);
        let dims: Vec<usize> = (0..ndim).map(|_| r.gen_range(6..=12)).collect();
        let o = r.gen_range(1..=5);
        let k: Vec<usize> = (0..ndim).map(|_| r.gen_range(1..=3)).collect();
        let conv = if ndim == 2 {
            LayerSpec::Conv2d {
                in_channels: c,
                out_channels: o,
                kernel: [k[0], k[1]],
            }
        } else {
            LayerSpec::Conv3d {
                in_channels: c,
                out_channels: o,
                kernel: [k[0], k[1], k[2]],
            }
        };
        let flat = o * (0..ndim).map(|a| dims[a] - k[a] + 1).product::<usize>();
        ModelSpec {
            kind: ModelKind::Cnn,
            input: InputSpec::Grid { channels: c, dims },
            layers: vec![
                conv,
                LayerSpec::Relu,
                LayerSpec::Dense {
                    inputs: flat,
                    outputs: 7,
                },
                LayerSpec::Softmax,
            ],
            input_norm: None,
        }
    }
}

pub const GRAD_EPS: f64 = 1e-4;
pub const GRAD_TOL: f64 = 1e-4;
pub const GRAD_TRIALS: u64 = 20;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Worst relative error over every parameter of `model`.
pub fn gradient_error(model: &mut Model<f64>, x: &Input<f64>, y: usize) -> f64 {
    let (_, grad) = model.loss_and_grad(x, y).unwrap();
    let mut worst = 0f64;
    for (i, &g) in grad.iter().enumerate() {
        let orig = model.params()[i];
        model.params_mut()[i] = orig + GRAD_EPS;
        let lp = model.loss(x, y).unwrap();
        model.params_mut()[i] = orig - GRAD_EPS;
        let lm = model.loss(x, y).unwrap();
        model.params_mut()[i] = orig;
        worst = worst.max(rel_err(g, (lp - lm) / (2.0 * GRAD_EPS)));
    }
    worst
}

pub fn grid_input(r: &mut ChaCha8Rng, channels: usize, dims: &[usize]) -> Input<f64> {
    let mut d = [1usize; 3];
    d[..dims.len()].copy_from_slice(dims);
    let n = channels * d.iter().product::<usize>();
    Input::Grid {
        channels,
        dims: d,
        ndim: dims.len(),
        data: (0..n).map(|_| r.gen_range(-1.0..1.0)).collect(),
    }
}

pub fn random_graph(r: &mut ChaCha8Rng, features: usize, pseudo_dim: usize) -> GraphInput<f64> {
    let nodes = r.gen_range(1..7);
    let mut edges = Vec::new();
    for a in 0..nodes as u32 {
        for b in 0..nodes as u32 {
            if a != b && r.gen_bool(0.5) {
                edges.push((a, b));
            }
        }
    }
    GraphInput {
        nodes,
        feature_dim: features,
        features: (0..nodes * features)
            .map(|_| r.gen_range(-1.0..1.0))
            .collect(),
        pseudo_dim,
        // Away from knots, where the degree-1 basis has kinks.
        pseudo: (0..edges.len() * pseudo_dim)
            .map(|_| r.gen_range(0.01..0.49) + if r.gen() { 0.5 } else { 0.0 })
            .collect(),
        edges,
    }
}

fn cnn(channels: usize, dims: &[usize], mut layers: Vec<LayerSpec>, flat: usize) -> ModelSpec {
    layers.push(LayerSpec::Dense {
        inputs: flat,
        outputs: 7,
    });
    layers.push(LayerSpec::Softmax);
    ModelSpec {
        kind: ModelKind::Cnn,
        input: InputSpec::Grid {
            channels,
            dims: dims.to_vec(),
        },
        layers,
        input_norm: None,
    }
}

/// Layer kinds covered by [`gradient_case`].
pub const GRADIENT_CASES: [&str; 6] = [
    "dense",
    "conv2d",
    "conv3d",
    "maxpool2d",
    "maxpool3d",
    "splineconv",
];

/// A random small model exercising `case`, with an input for it.
pub fn gradient_case(case: &str, r: &mut ChaCha8Rng) -> (ModelSpec, Input<f64>) {
    match case {
        "dense" => {
            let d = r.gen_range(1..9);
            let h = r.gen_range(1..9);
            let layers = vec![
                LayerSpec::Dense {
                    inputs: d,
                    outputs: h,
                },
                LayerSpec::Elu,
            ];
            (cnn(1, &[d, 1, 1], layers, h), grid_input(r, 1, &[d, 1, 1]))
        }
        "conv2d" => {
            let c = r.gen_range(1..3);
            let k = [r.gen_range(1..4), r.gen_range(1..4)];
            let dims = [r.gen_range(k[0] + 2..8), r.gen_range(k[1] + 2..8)];
            let (o1, o2) = (r.gen_range(1..4), r.gen_range(1..3));
            let flat = o2 * (dims[0] + 2 - 2 * k[0]) * (dims[1] + 2 - 2 * k[1]);
            let layers = vec![
                LayerSpec::Conv2d {
                    in_channels: c,
                    out_channels: o1,
                    kernel: k,
                },
                LayerSpec::Elu,
                LayerSpec::Conv2d {
                    in_channels: o1,
                    out_channels: o2,
                    kernel: k,
                },
            ];
            (cnn(c, &dims, layers, flat), grid_input(r, c, &dims))
        }
        "conv3d" => {
            let c = r.gen_range(1..3);
            let k = [r.gen_range(1..3), r.gen_range(1..3), r.gen_range(1..3)];
            let dims: Vec<usize> = k.iter().map(|&k| r.gen_range(2 * k..2 * k + 3)).collect();
            let (o1, o2) = (r.gen_range(1..3), r.gen_range(1..3));
            let flat = o2 * (0..3).map(|a| dims[a] + 2 - 2 * k[a]).product::<usize>();
            let layers = vec![
                LayerSpec::Conv3d {
                    in_channels: c,
                    out_channels: o1,
                    kernel: k,
                },
                LayerSpec::Elu,
                LayerSpec::Conv3d {
                    in_channels: o1,
                    out_channels: o2,
                    kernel: k,
                },
            ];
            (cnn(c, &dims, layers, flat), grid_input(r, c, &dims))
        }
        "maxpool2d" => {
            let dims = [r.gen_range(4..9), r.gen_range(4..9)];
            let flat = 2 * ((dims[0] - 2) / 2) * ((dims[1] - 2) / 2);
            let layers = vec![
                LayerSpec::Conv2d {
                    in_channels: 1,
                    out_channels: 2,
                    kernel: [3, 3],
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool2d { size: 2 },
            ];
            (cnn(1, &dims, layers, flat), grid_input(r, 1, &dims))
        }
        "maxpool3d" => {
            let dims: Vec<usize> = (0..3).map(|_| r.gen_range(4..7)).collect();
            let flat = 2 * dims.iter().map(|d| (d - 2) / 2).product::<usize>();
            let layers = vec![
                LayerSpec::Conv3d {
                    in_channels: 1,
                    out_channels: 2,
                    kernel: [3, 3, 3],
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool3d { size: 2 },
            ];
            (cnn(1, &dims, layers, flat), grid_input(r, 1, &dims))
        }
        "splineconv" => {
            let pd = r.gen_range(1..4);
            let f = r.gen_range(1..4);
            let h = r.gen_range(1..4);
            let kernel: Vec<usize> = (0..pd).map(|_| r.gen_range(2..4)).collect();
            let spec = ModelSpec {
                kind: ModelKind::Gnn,
                input: InputSpec::Graph {
                    features: f,
                    pseudo_dim: pd,
                },
                layers: vec![
                    LayerSpec::SplineConv {
                        in_channels: f,
                        out_channels: h,
                        kernel: kernel.clone(),
                    },
                    LayerSpec::Elu,
                    LayerSpec::SplineConv {
                        in_channels: h,
                        out_channels: 3,
                        kernel,
                    },
                    LayerSpec::Elu,
                    LayerSpec::GlobalMeanPool,
                    LayerSpec::Dense {
                        inputs: 3,
                        outputs: 7,
                    },
                    LayerSpec::Softmax,
                ],
                input_norm: Some(volgraph_core::neural::InputNorm {
                    mean: (0..f).map(|_| r.gen_range(-1.0..1.0)).collect(),
                    std: (0..f).map(|_| r.gen_range(0.5..2.0)).collect(),
                }),
            };
            (spec, Input::Graph(random_graph(r, f, pd)))
        }
        other => panic!("unknown case {other}"),
    }
}

/// Worst relative error per trial for one layer kind.
pub fn gradient_trials(case: &str) -> Vec<f64> {
    (0..GRAD_TRIALS)
        .map(|t| {
            let mut r = rng(t * 7919 + case.len() as u64);
            let (spec, x) = gradient_case(case, &mut r);
            let mut model = Model::<f64>::init(spec, r.gen()).unwrap();
            for p in model.params_mut() {
                if *p == 0.0 {
                    *p = r.gen_range(-0.1..0.1);
                }
            }
            let y = r.gen_range(0..7);
            gradient_error(&mut model, &x, y)
        })
        .collect()
}

/// Worst relative error of the softmax cross-entropy logit gradient per trial.
pub fn softmax_ce_trials() -> Vec<f64> {
    use volgraph_core::neural::softmax_cross_entropy;
    (0..GRAD_TRIALS)
        .map(|t| {
            let mut r = rng(t);
            let logits: Vec<f64> = (0..7).map(|_| r.gen_range(-3.0..3.0)).collect();
            let y = r.gen_range(0..7);
            let (_, g) = softmax_cross_entropy(&logits, y);
            (0..7)
                .map(|i| {
                    let mut p = logits.clone();
                    p[i] += GRAD_EPS;
                    let mut m = logits.clone();
                    m[i] -= GRAD_EPS;
                    let num = (softmax_cross_entropy(&p, y).0 - softmax_cross_entropy(&m, y).0)
                        / (2.0 * GRAD_EPS);
                    rel_err(g[i], num)
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Population mean and variance in f64.
pub fn mean_var(v: &[f32]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = v.iter().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / n;
    (m, var)
}
