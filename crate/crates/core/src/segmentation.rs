//! SLIC superpixels/supervoxels, connectivity enforcement and per-segment
//! smoothing.
//!
//! The clustering is Achanta-style localized k-means in joint
//! intensity/space coordinates. Each element is compared against every
//! center whose `2S` window covers it, plus the center it already belongs
//! to. Keeping the incumbent as a candidate makes the summed squared
//! distance non-increasing across iterations even when a center moves
//! far enough that the element falls outside its new window.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduction::Image2D;
use crate::volume::Volume;

/// Borrowed scalar grid; 2D images use `dims[2] == 1` and `ndim == 2`.
#[derive(Debug, Clone, Copy)]
pub struct GridRef<'a> {
    pub dims: [usize; 3],
    pub ndim: usize,
    pub data: &'a [f32],
}

impl<'a> GridRef<'a> {
    pub fn new(dims: [usize; 3], ndim: usize, data: &'a [f32]) -> Result<Self> {
        if !(2..=3).contains(&ndim) || (ndim == 2 && dims[2] != 1) {
            return Err(Error::param(format!(
                "bad grid ndim {ndim} for dims {dims:?}"
            )));
        }
        if dims.contains(&0) || dims.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!(
                "grid {dims:?} with {} values",
                data.len()
            )));
        }
        Ok(Self { dims, ndim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

impl<'a> From<&'a Volume> for GridRef<'a> {
    fn from(v: &'a Volume) -> Self {
        GridRef {
            dims: v.dims(),
            ndim: 3,
            data: v.data(),
        }
    }
}

impl<'a> From<&'a Image2D> for GridRef<'a> {
    fn from(v: &'a Image2D) -> Self {
        let [w, h] = v.dims();
        GridRef {
            dims: [w, h, 1],
            ndim: 2,
            data: v.data(),
        }
    }
}

#[inline]
fn coords(i: usize, dims: [usize; 3]) -> [usize; 3] {
    let x = i % dims[0];
    let r = i / dims[0];
    [x, r % dims[1], r / dims[1]]
}

#[inline]
fn linear(c: [usize; 3], dims: [usize; 3]) -> usize {
    (c[2] * dims[1] + c[1]) * dims[0] + c[0]
}

/// Calls `f` for each face neighbor of element `i`.
#[inline]
fn for_each_face_neighbor(i: usize, dims: [usize; 3], mut f: impl FnMut(usize)) {
    let c = coords(i, dims);
    let strides = [1, dims[0], dims[0] * dims[1]];
    for a in 0..3 {
        if c[a] > 0 {
            f(i - strides[a]);
        }
        if c[a] + 1 < dims[a] {
            f(i + strides[a]);
        }
    }
}

/// Per-element segment ids forming the contiguous range `0..S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    dims: [usize; 3],
    ndim: usize,
    labels: Vec<u32>,
    segments: usize,
}

impl LabelMap {
    /// Validates that ids cover `0..S` without gaps.
    pub fn new(dims: [usize; 3], ndim: usize, labels: Vec<u32>) -> Result<Self> {
        if !(2..=3).contains(&ndim) || (ndim == 2 && dims[2] != 1) {
            return Err(Error::param(format!(
                "bad label map ndim {ndim} for {dims:?}"
            )));
        }
        if dims.iter().product::<usize>() != labels.len() || labels.is_empty() {
            return Err(Error::Shape(format!(
                "label map {dims:?} with {} ids",
                labels.len()
            )));
        }
        let max = *labels.iter().max().unwrap() as usize;
        let mut seen = vec![false; max + 1];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(gap) = seen.iter().position(|s| !s) {
            return Err(Error::param(format!(
                "label ids not contiguous: {gap} missing"
            )));
        }
        Ok(Self {
            dims,
            ndim,
            labels,
            segments: max + 1,
        })
    }

    /// Renumber arbitrary ids to `0..S` by first occurrence in scan order.
    pub fn compact(dims: [usize; 3], ndim: usize, raw: &[u32]) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|&l| {
                let next = map.len() as u32;
                *map.entry(l).or_insert(next)
            })
            .collect();
        Self::new(dims, ndim, labels)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn segment_count(&self) -> usize {
        self.segments
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u32 {
        self.labels[linear([x, y, z], self.dims)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlicConfig {
    /// Target segment count `K`.
    pub segments: usize,
    /// Compactness `m`.
    pub compactness: f64,
    pub iterations: usize,
    pub enforce_connectivity: bool,
    /// Move each seed to the lowest-gradient element in its 3^d neighborhood.
    pub perturb_seeds: bool,
    /// Components smaller than `min_size_factor * N / K` are merged away.
    pub min_size_factor: f64,
}

pub const DEFAULT_SUPERVOXELS: usize = 200;
pub const DEFAULT_SUPERPIXELS: usize = 150;

impl Default for SlicConfig {
    fn default() -> Self {
        Self {
            segments: DEFAULT_SUPERVOXELS,
            compactness: 0.5,
            iterations: 10,
            enforce_connectivity: true,
            perturb_seeds: true,
            min_size_factor: 0.25,
        }
    }
}

impl SlicConfig {
    pub fn supervoxels() -> Self {
        Self::default()
    }

    pub fn superpixels() -> Self {
        Self {
            segments: DEFAULT_SUPERPIXELS,
            ..Self::default()
        }
    }

    pub fn with_segments(mut self, k: usize) -> Self {
        self.segments = k;
        self
    }

    pub fn with_compactness(mut self, m: f64) -> Self {
        self.compactness = m;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.segments == 0 {
            return Err(Error::param("SLIC needs at least one segment"));
        }
        if self.segments > n {
            return Err(Error::param(format!(
                "SLIC asked for {} segments from {n} elements",
                self.segments
            )));
        }
        if !self.compactness.is_finite() || self.compactness <= 0.0 {
            return Err(Error::param("compactness must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::param("SLIC needs at least one iteration"));
        }
        Ok(())
    }
}

/// A cluster center in (position, intensity) space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Center {
    pub pos: [f64; 3],
    pub intensity: f64,
}

/// Everything a SLIC run produces, for inspection and testing.
#[derive(Debug, Clone)]
pub struct SlicRun {
    pub labels: LabelMap,
    /// Seeds after optional perturbation.
    pub seeds: Vec<Center>,
    /// Centers after the last update step.
    pub centers: Vec<Center>,
    /// Summed squared distance after each assignment step.
    pub objective: Vec<f64>,
    /// Grid interval `S`.
    pub interval: f64,
}

/// Seeds per axis whose product is as close to `k` as possible while
/// keeping the spacing near `interval`.
fn seed_grid(dims: [usize; 3], ndim: usize, k: usize, interval: f64) -> [usize; 3] {
    let mut best = [1usize; 3];
    let mut best_score = (usize::MAX, f64::INFINITY);
    for step in 0..=80 {
        let s = interval * 2f64.powf(-1.0 + step as f64 / 40.0);
        let mut n = [1usize; 3];
        for a in 0..ndim {
            n[a] = ((dims[a] as f64 / s).round() as usize).clamp(1, dims[a]);
        }
        let p: usize = n.iter().product();
        let score = (p.abs_diff(k), (s - interval).abs());
        if score.0 < best_score.0 || (score.0 == best_score.0 && score.1 < best_score.1) {
            best = n;
            best_score = score;
        }
    }
    best
}

fn gradient_at(g: &GridRef, c: [usize; 3]) -> f64 {
    let mut sum = 0.0;
    for a in 0..g.ndim {
        let mut lo = c;
        let mut hi = c;
        lo[a] = c[a].saturating_sub(1);
        hi[a] = (c[a] + 1).min(g.dims[a] - 1);
        let d = g.data[linear(hi, g.dims)] as f64 - g.data[linear(lo, g.dims)] as f64;
        sum += d * d;
    }
    sum
}

fn initial_seeds(g: &GridRef, cfg: &SlicConfig, interval: f64) -> Vec<Center> {
    let n = seed_grid(g.dims, g.ndim, cfg.segments, interval);
    let mut seeds = Vec::with_capacity(n.iter().product());
    for iz in 0..n[2] {
        for iy in 0..n[1] {
            for ix in 0..n[0] {
                let idx = [ix, iy, iz];
                let mut pos = [0.0; 3];
                let mut vox = [0usize; 3];
                for a in 0..3 {
                    let step = g.dims[a] as f64 / n[a] as f64;
                    pos[a] = (idx[a] as f64 + 0.5) * step - 0.5;
                    vox[a] = (pos[a].round().max(0.0) as usize).min(g.dims[a] - 1);
                }
                if cfg.perturb_seeds {
                    let mut best = gradient_at(g, vox);
                    let mut best_vox = None;
                    let r = |a: usize| if a < g.ndim { 1isize } else { 0 };
                    for dz in -r(2)..=r(2) {
                        for dy in -r(1)..=r(1) {
                            for dx in -r(0)..=r(0) {
                                let d = [dx, dy, dz];
                                let mut c = [0usize; 3];
                                let mut inside = true;
                                for a in 0..3 {
                                    let v = vox[a] as isize + d[a];
                                    if v < 0 || v >= g.dims[a] as isize {
                                        inside = false;
                                    }
                                    c[a] = v.max(0) as usize;
                                }
                                if !inside {
                                    continue;
                                }
                                let grad = gradient_at(g, c);
                                if grad < best {
                                    best = grad;
                                    best_vox = Some(c);
                                }
                            }
                        }
                    }
                    if let Some(c) = best_vox {
                        vox = c;
                        pos = [c[0] as f64, c[1] as f64, c[2] as f64];
                    }
                }
                seeds.push(Center {
                    pos,
                    intensity: g.data[linear(vox, g.dims)] as f64,
                });
            }
        }
    }
    seeds
}

#[inline]
fn dist2(c: &Center, p: [usize; 3], v: f32, spatial_weight: f64) -> f64 {
    let dc = v as f64 - c.intensity;
    let ds2: f64 = (0..3)
        .map(|a| {
            let d = p[a] as f64 - c.pos[a];
            d * d
        })
        .sum();
    dc * dc + ds2 * spatial_weight
}

/// SLIC clustering followed by optional connectivity enforcement.
pub fn slic(g: GridRef, cfg: &SlicConfig) -> Result<LabelMap> {
    Ok(slic_run(g, cfg)?.labels)
}

pub fn slic_run(g: GridRef, cfg: &SlicConfig) -> Result<SlicRun> {
    let n = g.len();
    cfg.validate(n)?;
    let interval = (n as f64 / cfg.segments as f64).powf(1.0 / g.ndim as f64);
    let seeds = initial_seeds(&g, cfg, interval);
    let spatial_weight = (cfg.compactness / interval).powi(2);

    let grid_counts = seed_grid(g.dims, g.ndim, cfg.segments, interval);
    let mut half = [0isize; 3];
    for a in 0..g.ndim {
        let step = g.dims[a] as f64 / grid_counts[a] as f64;
        half[a] = interval.max(step).ceil() as isize;
    }

    let mut centers = seeds.clone();
    let mut label = vec![u32::MAX; n];
    let mut best = vec![f64::INFINITY; n];
    let mut objective = Vec::with_capacity(cfg.iterations);

    for _ in 0..cfg.iterations {
        // Incumbent center is always a candidate.
        for i in 0..n {
            best[i] = match label[i] {
                u32::MAX => f64::INFINITY,
                l => dist2(
                    &centers[l as usize],
                    coords(i, g.dims),
                    g.data[i],
                    spatial_weight,
                ),
            };
        }
        for (k, c) in centers.iter().enumerate() {
            let mut lo = [0usize; 3];
            let mut hi = [0usize; 3];
            for a in 0..3 {
                let r = c.pos[a].round() as isize;
                lo[a] = (r - half[a]).max(0) as usize;
                hi[a] = ((r + half[a]).max(-1) + 1).min(g.dims[a] as isize).max(0) as usize;
            }
            for z in lo[2]..hi[2] {
                for y in lo[1]..hi[1] {
                    let row = (z * g.dims[1] + y) * g.dims[0];
                    for x in lo[0]..hi[0] {
                        let i = row + x;
                        let d = dist2(c, [x, y, z], g.data[i], spatial_weight);
                        if d < best[i] || (d == best[i] && (k as u32) < label[i]) {
                            best[i] = d;
                            label[i] = k as u32;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            if label[i] == u32::MAX {
                let p = coords(i, g.dims);
                for (k, c) in centers.iter().enumerate() {
                    let d = dist2(c, p, g.data[i], spatial_weight);
                    if d < best[i] {
                        best[i] = d;
                        label[i] = k as u32;
                    }
                }
            }
        }
        objective.push(best.iter().sum());

        let mut acc = vec![[0f64; 5]; centers.len()];
        for i in 0..n {
            let p = coords(i, g.dims);
            let a = &mut acc[label[i] as usize];
            a[0] += p[0] as f64;
            a[1] += p[1] as f64;
            a[2] += p[2] as f64;
            a[3] += g.data[i] as f64;
            a[4] += 1.0;
        }
        for (c, a) in centers.iter_mut().zip(&acc) {
            if a[4] > 0.0 {
                c.pos = [a[0] / a[4], a[1] / a[4], a[2] / a[4]];
                c.intensity = a[3] / a[4];
            }
        }
    }

    let mut labels = LabelMap::compact(g.dims, g.ndim, &label)?;
    if cfg.enforce_connectivity {
        let min_size = cfg.min_size_factor * n as f64 / cfg.segments as f64;
        labels = enforce_connectivity(&labels, min_size);
    }
    Ok(SlicRun {
        labels,
        seeds,
        centers,
        objective,
        interval,
    })
}

/// Face-connected components in scan order: (component id per element, sizes).
pub fn connected_components(labels: &LabelMap) -> (Vec<u32>, Vec<usize>) {
    let n = labels.len();
    let dims = labels.dims();
    let ids = labels.labels();
    let mut comp = vec![u32::MAX; n];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != u32::MAX {
            continue;
        }
        let cid = sizes.len() as u32;
        let lab = ids[start];
        comp[start] = cid;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            for_each_face_neighbor(i, dims, |j| {
                if comp[j] == u32::MAX && ids[j] == lab {
                    comp[j] = cid;
                    queue.push_back(j);
                }
            });
        }
        sizes.push(size);
    }
    (comp, sizes)
}

/// Make every segment one face-connected component.
///
/// Components smaller than `min_size` are merged, in scan order, into the
/// largest adjacent segment (ties go to the lower id); other components
/// become segments of their own. Ids are re-compacted to `0..S`.
pub fn enforce_connectivity(labels: &LabelMap, min_size: f64) -> LabelMap {
    let dims = labels.dims();
    let (comp, sizes) = connected_components(labels);
    let nc = sizes.len();
    let mut adj = vec![BTreeSet::new(); nc];
    for (i, &c) in comp.iter().enumerate() {
        for_each_face_neighbor(i, dims, |j| {
            let d = comp[j];
            if d != c {
                adj[c as usize].insert(d as usize);
            }
        });
    }

    let mut parent: Vec<usize> = (0..nc).collect();
    let mut size = sizes.clone();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for c in 0..nc {
        if find(&mut parent, c) != c || (size[c] as f64) >= min_size {
            continue;
        }
        let neighbors: BTreeSet<usize> = adj[c]
            .iter()
            .map(|&d| find(&mut parent, d))
            .filter(|&d| d != c)
            .collect();
        let target = neighbors
            .into_iter()
            .max_by(|&a, &b| size[a].cmp(&size[b]).then(b.cmp(&a)));
        if let Some(t) = target {
            parent[c] = t;
            size[t] += size[c];
            let moved = std::mem::take(&mut adj[c]);
            adj[t].extend(moved);
        }
    }

    let roots: Vec<u32> = comp
        .iter()
        .map(|&c| find(&mut parent, c as usize) as u32)
        .collect();
    LabelMap::compact(dims, labels.ndim(), &roots).expect("non-empty label map")
}

/// Replace each element by its segment's mean intensity.
pub fn smooth_by_segment(g: GridRef, labels: &LabelMap) -> Result<Vec<f32>> {
    if g.dims != labels.dims() {
        return Err(Error::param(format!(
            "image dims {:?} differ from label dims {:?}",
            g.dims,
            labels.dims()
        )));
    }
    let s = labels.segment_count();
    let mut sum = vec![0f64; s];
    let mut count = vec![0usize; s];
    for (&l, &v) in labels.labels().iter().zip(g.data) {
        sum[l as usize] += v as f64;
        count[l as usize] += 1;
    }
    let mean: Vec<f32> = sum
        .iter()
        .zip(&count)
        .map(|(&t, &c)| (t / c as f64) as f32)
        .collect();
    Ok(labels.labels().iter().map(|&l| mean[l as usize]).collect())
}

pub fn smooth_volume(v: &Volume, labels: &LabelMap) -> Result<Volume> {
    Volume::new(v.dims(), smooth_by_segment(v.into(), labels)?)
}

pub fn smooth_image(img: &Image2D, labels: &LabelMap) -> Result<Image2D> {
    Image2D::new(img.dims(), smooth_by_segment(img.into(), labels)?)
}
