//! Property suites shared by the integration tests and the acceptance run.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use volgraph_core::graph::{build_rag, edge_pseudo_coords, knn_edges};
use volgraph_core::segmentation::{
    enforce_connectivity, slic_run, smooth_by_segment, GridRef, SlicConfig,
};

use super::*;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($arg)+));
        }
    };
}

pub type Check = Result<(), String>;

/// A few Gaussian bumps plus noise, min-max normalized.
pub fn random_volume(r: &mut ChaCha8Rng, max_side: usize) -> ([usize; 3], Vec<f32>) {
    let dims = [
        r.gen_range(4..=max_side),
        r.gen_range(4..=max_side),
        r.gen_range(4..=max_side),
    ];
    let bumps: Vec<([f64; 3], f64)> = (0..r.gen_range(1..4))
        .map(|_| {
            (
                [
                    r.gen_range(0.0..dims[0] as f64),
                    r.gen_range(0.0..dims[1] as f64),
                    r.gen_range(0.0..dims[2] as f64),
                ],
                r.gen_range(1.5..4.0),
            )
        })
        .collect();
    let mut data = Vec::with_capacity(dims.iter().product());
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let p = [x as f64, y as f64, z as f64];
                let s: f64 = bumps
                    .iter()
                    .map(|(c, sig)| {
                        let d2: f64 = (0..3).map(|a| (p[a] - c[a]).powi(2)).sum();
                        (-d2 / (2.0 * sig * sig)).exp()
                    })
                    .sum();
                data.push((s + r.gen_range(0.0..0.1)) as f32);
            }
        }
    }
    let (lo, hi) = data
        .iter()
        .fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    for v in &mut data {
        *v = (*v - lo) / (hi - lo);
    }
    (dims, data)
}

/// Coverage, connectivity, segment count in [K/2, 2K] and a non-increasing
/// objective on 50 random volumes up to 16^3.
pub fn slic_random_volumes() -> Check {
    for case in 0..50u64 {
        let mut r = rng(1000 + case);
        let (dims, data) = random_volume(&mut r, 16);
        let n: usize = dims.iter().product();
        let k = r.gen_range(2..=(n / 8).min(40));
        let cfg = SlicConfig::supervoxels().with_segments(k);
        let run =
            slic_run(GridRef::new(dims, 3, &data).unwrap(), &cfg).map_err(|e| e.to_string())?;
        let labels = &run.labels;
        let s = labels.segment_count();
        ensure!(
            labels.len() == n,
            "case {case}: {} labels for {n} voxels",
            labels.len()
        );
        ensure!(
            labels.labels().iter().all(|&l| (l as usize) < s),
            "case {case}: label outside 0..{s}"
        );
        ensure!(all_connected(labels), "case {case}: disconnected segment");
        ensure!(
            2 * s >= k && s <= 2 * k,
            "case {case}: {s} segments for K={k}"
        );
        for w in run.objective.windows(2) {
            ensure!(
                w[1] <= w[0],
                "case {case}: objective rose {} -> {}",
                w[0],
                w[1]
            );
        }
    }
    Ok(())
}

/// Uniform 12^3, K=8, m=10, no enforcement: octant partition matching the
/// Lloyd oracle.
pub fn slic_uniform_cube() -> Check {
    let dims = [12, 12, 12];
    let data = vec![0.5f32; 1728];
    let cfg = SlicConfig {
        segments: 8,
        compactness: 10.0,
        enforce_connectivity: false,
        ..SlicConfig::default()
    };
    let run = slic_run(GridRef::new(dims, 3, &data).unwrap(), &cfg).map_err(|e| e.to_string())?;
    ensure!(
        run.labels.segment_count() == 8,
        "{} segments",
        run.labels.segment_count()
    );
    let sw = (cfg.compactness / run.interval).powi(2);
    let oracle = lloyd_oracle(&data, dims, &run.seeds, sw, cfg.iterations);
    for (c, o) in run.centers.iter().zip(&oracle) {
        for a in 0..3 {
            ensure!((c.pos[a] - o.pos[a]).abs() <= 1.0, "{c:?} vs oracle {o:?}");
            let near = [2.5, 8.5].iter().any(|t| (c.pos[a] - t).abs() <= 1.0);
            ensure!(near, "center {c:?} off the octant grid");
        }
    }
    let mut sizes = vec![0usize; 8];
    for &l in run.labels.labels() {
        sizes[l as usize] += 1;
    }
    ensure!(sizes.iter().all(|&s| s == 216), "sizes {sizes:?}");
    Ok(())
}

pub fn enforcement_connected() -> Check {
    for case in 0..100u64 {
        let mut r = rng(case);
        let ndim = r.gen_range(2..=3);
        let lm = random_labels(&mut r, 6, ndim, 4);
        let min = r.gen_range(0.0..6.0);
        let out = enforce_connectivity(&lm, min);
        ensure!(
            all_connected(&out),
            "case {case}: disconnected after enforcement"
        );
        ensure!(out.len() == lm.len(), "case {case}: size changed");
    }
    Ok(())
}

/// Idempotence, preserved mean, non-increasing variance over 100 cases.
pub fn smoothing_properties() -> Check {
    for case in 0..100u64 {
        let mut r = rng(500 + case);
        let ndim = r.gen_range(2..=3);
        let ids = r.gen_range(1..12);
        let lm = random_labels(&mut r, 8, ndim, ids);
        let data: Vec<f32> = (0..lm.len()).map(|_| r.gen_range(0.0..1.0)).collect();
        let g = GridRef::new(lm.dims(), ndim, &data).unwrap();
        let once = smooth_by_segment(g, &lm).map_err(|e| e.to_string())?;
        let twice = smooth_by_segment(GridRef::new(lm.dims(), ndim, &once).unwrap(), &lm)
            .map_err(|e| e.to_string())?;
        ensure!(once == twice, "case {case}: not idempotent");
        let (m0, v0) = mean_var(&data);
        let (m1, v1) = mean_var(&once);
        ensure!((m0 - m1).abs() < 1e-6, "case {case}: mean {m0} -> {m1}");
        ensure!(v1 <= v0, "case {case}: variance {v0} -> {v1}");
    }
    Ok(())
}

pub fn rag_matches_scan() -> Check {
    for case in 0..100u64 {
        let mut r = rng(case);
        let ndim = r.gen_range(2..=3);
        let ids = r.gen_range(1..10);
        let lm = random_labels(&mut r, 6, ndim, ids);
        ensure!(
            build_rag(&lm) == rag_oracle(&lm),
            "case {case}: RAG differs from scan"
        );
    }
    Ok(())
}

pub fn knn_matches_sort() -> Check {
    for case in 0..100u64 {
        let mut r = rng(case);
        let n = r.gen_range(2..25);
        // Coarse grid points so that distance ties actually occur.
        let pts: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                [
                    r.gen_range(0..5) as f64,
                    r.gen_range(0..5) as f64,
                    r.gen_range(0..3) as f64,
                ]
            })
            .collect();
        let k = r.gen_range(1..n);
        let edges = knn_edges(&pts, k).map_err(|e| e.to_string())?;
        ensure!(
            edges.len() == n * k,
            "case {case}: {} edges, want {}",
            edges.len(),
            n * k
        );
        let set: BTreeSet<_> = edges.iter().copied().collect();
        ensure!(set.len() == edges.len(), "case {case}: duplicate edge");
        ensure!(
            set == knn_oracle(&pts, k),
            "case {case}: differs from sort oracle"
        );
        let mut per_node = vec![0usize; n];
        for &(_, i) in &edges {
            per_node[i as usize] += 1;
        }
        ensure!(
            per_node.iter().all(|&c| c == k),
            "case {case}: degrees {per_node:?}"
        );
    }
    let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
    ensure!(knn_edges(&pts, 3).is_err(), "k >= n accepted");
    Ok(())
}

pub fn pseudo_coords_bounded() -> Check {
    for case in 0..100u64 {
        let mut r = rng(case);
        let dim = r.gen_range(2..=3);
        let n = r.gen_range(2..15);
        let pts: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                let mut p = [0.0; 3];
                for v in p.iter_mut().take(dim) {
                    *v = r.gen_range(0.0..20.0);
                }
                p
            })
            .collect();
        let mut edges = Vec::new();
        for a in 0..n as u32 {
            for b in 0..n as u32 {
                if a != b && r.gen_bool(0.4) {
                    edges.push((a, b));
                    edges.push((b, a));
                }
            }
        }
        edges.sort();
        edges.dedup();
        let u = edge_pseudo_coords(&pts, &edges, dim).map_err(|e| e.to_string())?;
        ensure!(
            u.iter().all(|v| (0.0..=1.0).contains(v)),
            "case {case}: out of [0, 1]"
        );
        if !edges.is_empty() {
            ensure!(
                u.iter().any(|&v| v == 0.0 || v == 1.0),
                "case {case}: extremes not attained"
            );
        }
        for (e, &(a, b)) in edges.iter().enumerate() {
            let back = edges.binary_search(&(b, a)).unwrap();
            for d in 0..dim {
                let s = u[e * dim + d] + u[back * dim + d];
                ensure!((s - 1.0).abs() < 1e-6, "case {case}: reverse sum {s}");
            }
        }
    }
    Ok(())
}
