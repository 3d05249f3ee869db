//! Region graphs: segment statistics, adjacency, k-NN edges and the
//! normalized relative-position edge attributes consumed by spline kernels.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::{slic, smooth_by_segment, GridRef, LabelMap, SlicConfig};
use crate::volume::ClassLabel;

pub const DEFAULT_K_3D: usize = 6;
pub const DEFAULT_K_2D: usize = 4;

/// Per-segment summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionStats {
    /// Arithmetic mean of member coordinates, in voxel units.
    pub centroid: [f64; 3],
    pub mean_intensity: f64,
    pub size: usize,
}

pub fn region_stats(g: GridRef, labels: &LabelMap) -> Result<Vec<RegionStats>> {
    if g.dims != labels.dims() {
        return Err(Error::param("image and label dims differ"));
    }
    let s = labels.segment_count();
    let mut acc = vec![[0f64; 4]; s];
    let mut size = vec![0usize; s];
    let [nx, ny, _] = g.dims;
    for (i, (&l, &v)) in labels.labels().iter().zip(g.data).enumerate() {
        let a = &mut acc[l as usize];
        a[0] += (i % nx) as f64;
        a[1] += ((i / nx) % ny) as f64;
        a[2] += (i / (nx * ny)) as f64;
        a[3] += v as f64;
        size[l as usize] += 1;
    }
    acc.iter()
        .zip(&size)
        .enumerate()
        .map(|(id, (a, &n))| {
            if n == 0 {
                return Err(Error::Internal(format!("segment {id} has no members")));
            }
            let n_f = n as f64;
            Ok(RegionStats {
                centroid: [a[0] / n_f, a[1] / n_f, a[2] / n_f],
                mean_intensity: a[3] / n_f,
                size: n,
            })
        })
        .collect()
}

/// Undirected region adjacency under face connectivity, as sorted `(a, b)`
/// pairs with `a < b`.
pub fn build_rag(labels: &LabelMap) -> BTreeSet<(u32, u32)> {
    let dims = labels.dims();
    let ids = labels.labels();
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut edges = BTreeSet::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let i = (z * dims[1] + y) * dims[0] + x;
                let c = [x, y, z];
                for a in 0..3 {
                    if c[a] + 1 < dims[a] {
                        let (p, q) = (ids[i], ids[i + strides[a]]);
                        if p != q {
                            edges.insert((p.min(q), p.max(q)));
                        }
                    }
                }
            }
        }
    }
    edges
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

/// For every node `i`, directed edges `j -> i` from its `k` nearest
/// centroids (self excluded, ties to the lower id).
pub fn knn_edges(centroids: &[[f64; 3]], k: usize) -> Result<Vec<(u32, u32)>> {
    let s = centroids.len();
    if k == 0 {
        return Err(Error::param("k must be >= 1"));
    }
    if k >= s {
        return Err(Error::param(format!("k = {k} needs more than {s} nodes")));
    }
    let mut edges = Vec::with_capacity(s * k);
    let mut cand: Vec<(f64, u32)> = Vec::with_capacity(s);
    for (i, ci) in centroids.iter().enumerate() {
        cand.clear();
        cand.extend(
            centroids
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, cj)| (sq_dist(ci, cj), j as u32)),
        );
        cand.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut nearest: Vec<(f64, u32)> = cand[..k].to_vec();
        nearest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        edges.extend(nearest.into_iter().map(|(_, j)| (j, i as u32)));
    }
    Ok(edges)
}

/// `u = (pos[src] - pos[dst]) / (2M) + 0.5`, `M` the largest absolute
/// component over all edges; `0.5` everywhere when `M == 0`.
pub fn edge_pseudo_coords(
    positions: &[[f64; 3]],
    edges: &[(u32, u32)],
    dim: usize,
) -> Result<Vec<f32>> {
    let n = positions.len() as u32;
    if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= n || b >= n) {
        return Err(Error::Structural(format!(
            "edge ({a}, {b}) outside {n} nodes"
        )));
    }
    let delta =
        |&(s, t): &(u32, u32), a: usize| positions[s as usize][a] - positions[t as usize][a];
    let m = edges
        .iter()
        .flat_map(|e| (0..dim).map(move |a| delta(e, a).abs()))
        .fold(0f64, f64::max);
    let mut out = Vec::with_capacity(edges.len() * dim);
    for e in edges {
        for a in 0..dim {
            let u = if m > 0.0 {
                delta(e, a) / (2.0 * m) + 0.5
            } else {
                0.5
            };
            out.push(u.clamp(0.0, 1.0) as f32);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    Rag,
    Knn,
    #[default]
    Union,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodeConfig {
    pub slic: SlicConfig,
    pub k: usize,
    pub edges: EdgeMode,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        Self {
            slic: SlicConfig::supervoxels(),
            k: DEFAULT_K_3D,
            edges: EdgeMode::Union,
        }
    }
}

impl EncodeConfig {
    pub fn superpixels() -> Self {
        Self {
            slic: SlicConfig::superpixels(),
            k: DEFAULT_K_2D,
            edges: EdgeMode::Union,
        }
    }
}

/// Attributed region graph. Edges are directed `(src, dst)`; node features
/// and pseudo-coordinates are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGraph {
    pub nodes: usize,
    pub feature_dim: usize,
    pub features: Vec<f32>,
    pub edges: Vec<(u32, u32)>,
    pub pseudo_dim: usize,
    pub pseudo: Vec<f32>,
    pub label: ClassLabel,
}

impl RegionGraph {
    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.nodes * self.feature_dim {
            return Err(Error::Structural("feature block size mismatch".into()));
        }
        if self.pseudo.len() != self.edges.len() * self.pseudo_dim {
            return Err(Error::Structural(
                "pseudo-coordinate block size mismatch".into(),
            ));
        }
        for &(a, b) in &self.edges {
            if a as usize >= self.nodes || b as usize >= self.nodes {
                return Err(Error::Structural(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::Structural(format!("self-loop on node {a}")));
            }
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structural("non-finite node feature".into()));
        }
        if self.pseudo.iter().any(|u| !(0.0..=1.0).contains(u)) {
            return Err(Error::Structural("pseudo-coordinate outside [0, 1]".into()));
        }
        Ok(())
    }

    pub fn out_degree(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes];
        for &(a, _) in &self.edges {
            d[a as usize] += 1;
        }
        d
    }

    pub fn in_degree(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes];
        for &(_, b) in &self.edges {
            d[b as usize] += 1;
        }
        d
    }
}

/// Segment → graph. Node features are `[mean_intensity, relative_size,
/// cx, cy(, cz)]` with centroids scaled by the grid extent to `[0, 1]` and
/// `relative_size = size * S / N` (1.0 for an average segment).
pub fn graph_from_segments(
    g: GridRef,
    labels: &LabelMap,
    k: usize,
    mode: EdgeMode,
    label: ClassLabel,
) -> Result<RegionGraph> {
    let stats = region_stats(g, labels)?;
    let s = stats.len();
    let dim = g.ndim;
    let n = g.len() as f64;
    let feature_dim = 2 + dim;
    let mut features = Vec::with_capacity(s * feature_dim);
    for r in &stats {
        features.push(r.mean_intensity as f32);
        features.push((r.size as f64 * s as f64 / n) as f32);
        for a in 0..dim {
            let ext = (g.dims[a] - 1).max(1) as f64;
            features.push((r.centroid[a] / ext) as f32);
        }
    }
    let centroids: Vec<[f64; 3]> = stats.iter().map(|r| r.centroid).collect();

    let mut set = BTreeSet::new();
    if matches!(mode, EdgeMode::Rag | EdgeMode::Union) {
        for (a, b) in build_rag(labels) {
            set.insert((a, b));
            set.insert((b, a));
        }
    }
    if matches!(mode, EdgeMode::Knn | EdgeMode::Union) {
        set.extend(knn_edges(&centroids, k)?);
    }
    let edges: Vec<(u32, u32)> = set.into_iter().collect();
    let pseudo = edge_pseudo_coords(&centroids, &edges, dim)?;
    Ok(RegionGraph {
        nodes: s,
        feature_dim,
        features,
        edges,
        pseudo_dim: dim,
        pseudo,
        label,
    })
}

/// Full encoding: SLIC (with connectivity enforcement per config) →
/// smoothing → region statistics → edges → pseudo-coordinates.
pub fn encode_graph(g: GridRef, label: ClassLabel, cfg: &EncodeConfig) -> Result<RegionGraph> {
    let labels = slic(g, &cfg.slic)?;
    let smoothed = smooth_by_segment(g, &labels)?;
    let sg = GridRef::new(g.dims, g.ndim, &smoothed)?;
    graph_from_segments(sg, &labels, cfg.k, cfg.edges, label)
}

/// Where a graph dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sample_seeds: Vec<u64>,
    pub encode: EncodeConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    pub graphs: Vec<RegionGraph>,
    pub provenance: Option<Provenance>,
}

impl GraphDataset {
    pub fn validate(&self) -> Result<()> {
        if let Some(first) = self.graphs.first() {
            for g in &self.graphs {
                g.validate()?;
                if g.feature_dim != first.feature_dim || g.pseudo_dim != first.pseudo_dim {
                    return Err(Error::param("graphs disagree on feature or pseudo dims"));
                }
            }
        }
        Ok(())
    }
}
