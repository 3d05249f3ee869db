//! Spline-basis graph convolution (open B-splines, degree 1) and global
//! mean pooling.
//!
//! For target node `i` with in-degree `deg(i)`:
//!
//! ```text
//! out[i] = bias + root^T x[i]
//!        + 1/deg(i) * sum_{j->i} sum_s basis_s(u(j,i)) * W[kernel_s]^T x[j]
//! ```
//!
//! The neighbor sum is evaluated by first scattering `basis * x[j] / deg`
//! into per-(node, kernel) accumulators `z`, then contracting each touched
//! accumulator with its kernel matrix once.

use std::sync::atomic::{AtomicU64, Ordering};

use super::layers::{axpy, dot};
use super::Scalar;
use crate::error::{Error, Result};

static CLAMPED_PSEUDO: AtomicU64 = AtomicU64::new(0);

/// Number of pseudo-coordinate components clamped into `[0, 1]` so far.
pub fn clamped_pseudo_count() -> u64 {
    CLAMPED_PSEUDO.load(Ordering::Relaxed)
}

/// Kernel indices and weights of the `2^d` contributing knots.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis<T> {
    pub indices: Vec<usize>,
    pub weights: Vec<T>,
}

/// Writes the `2^d` (index, weight) pairs for `u` into the output slices.
/// Returns the number of clamped components.
fn basis_into<T: Scalar>(u: &[T], kernel: &[usize], idx: &mut [u32], w: &mut [T]) -> u64 {
    let d = kernel.len();
    let mut lo = [0usize; 8];
    let mut hi = [0usize; 8];
    let mut frac = [T::zero(); 8];
    let mut clamped = 0;
    for a in 0..d {
        let mut ua = u[a];
        if !(ua >= T::zero() && ua <= T::one()) {
            clamped += 1;
            ua = if ua > T::one() { T::one() } else { T::zero() };
        }
        let p = ua * T::of((kernel[a] - 1) as f64);
        let f = p.floor();
        let k0 = (f.as_f64() as usize).min(kernel[a] - 1);
        lo[a] = k0;
        hi[a] = (k0 + 1).min(kernel[a] - 1);
        frac[a] = p - T::of(k0 as f64);
    }
    for s in 0..(1usize << d) {
        let mut index = 0usize;
        let mut stride = 1usize;
        let mut weight = T::one();
        for a in 0..d {
            let upper = (s >> a) & 1 == 1;
            index += stride * if upper { hi[a] } else { lo[a] };
            weight = weight * if upper { frac[a] } else { T::one() - frac[a] };
            stride *= kernel[a];
        }
        idx[s] = index as u32;
        w[s] = weight;
    }
    clamped
}

/// Degree-1 open B-spline basis for one pseudo-coordinate.
///
/// Per dimension, `p = u * (k - 1)`; knots `floor(p)` and
/// `min(floor(p) + 1, k - 1)` get weights `1 - frac(p)` and `frac(p)`.
/// Kernel indices are linearized first-dimension fastest. Components
/// outside `[0, 1]` are clamped and counted in [`clamped_pseudo_count`].
pub fn bspline_basis<T: Scalar>(u: &[T], kernel: &[usize]) -> SplineBasis<T> {
    assert!(u.len() == kernel.len() && kernel.len() <= 3 && kernel.iter().all(|&k| k >= 1));
    let n = 1usize << kernel.len();
    let mut idx = vec![0u32; n];
    let mut weights = vec![T::zero(); n];
    let c = basis_into(u, kernel, &mut idx, &mut weights);
    if c > 0 {
        CLAMPED_PSEUDO.fetch_add(c, Ordering::Relaxed);
    }
    SplineBasis {
        indices: idx.into_iter().map(|i| i as usize).collect(),
        weights,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplineGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: Vec<usize>,
}

impl SplineGeometry {
    pub fn kernel_count(&self) -> usize {
        self.kernel.iter().product()
    }

    /// Parameter block layout: `W[K][in][out]`, `root[in][out]`, `bias[out]`.
    fn split<'a, T>(&self, params: &'a [T]) -> (&'a [T], &'a [T], &'a [T]) {
        let nw = self.kernel_count() * self.in_channels * self.out_channels;
        let nr = self.in_channels * self.out_channels;
        (&params[..nw], &params[nw..nw + nr], &params[nw + nr..])
    }
}

/// Forward intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct SplineCache<T> {
    z: Vec<T>,
    touched: Vec<bool>,
    basis_idx: Vec<u32>,
    basis_w: Vec<T>,
    inv_deg: Vec<T>,
}

pub fn spline_conv_forward<T: Scalar>(
    g: &SplineGeometry,
    params: &[T],
    x: &[T],
    nodes: usize,
    edges: &[(u32, u32)],
    pseudo: &[T],
) -> Result<(Vec<T>, SplineCache<T>)> {
    let (cin, cout) = (g.in_channels, g.out_channels);
    let d = g.kernel.len();
    let nb = 1usize << d;
    let kc = g.kernel_count();
    if x.len() != nodes * cin || pseudo.len() != edges.len() * d {
        return Err(Error::Shape("spline conv input sizes disagree".into()));
    }
    if let Some(&(a, b)) = edges
        .iter()
        .find(|&&(a, b)| a as usize >= nodes || b as usize >= nodes)
    {
        return Err(Error::Structural(format!(
            "edge ({a}, {b}) outside {nodes} nodes"
        )));
    }
    let (w, root, bias) = g.split(params);

    let mut deg = vec![0usize; nodes];
    for &(_, t) in edges {
        deg[t as usize] += 1;
    }
    let inv_deg: Vec<T> = deg
        .iter()
        .map(|&n| {
            if n > 0 {
                T::one() / T::of(n as f64)
            } else {
                T::zero()
            }
        })
        .collect();

    let mut basis_idx = vec![0u32; edges.len() * nb];
    let mut basis_w = vec![T::zero(); edges.len() * nb];
    let mut clamped = 0;
    for e in 0..edges.len() {
        clamped += basis_into(
            &pseudo[e * d..(e + 1) * d],
            &g.kernel,
            &mut basis_idx[e * nb..(e + 1) * nb],
            &mut basis_w[e * nb..(e + 1) * nb],
        );
    }
    if clamped > 0 {
        CLAMPED_PSEUDO.fetch_add(clamped, Ordering::Relaxed);
    }

    let mut z = vec![T::zero(); nodes * kc * cin];
    let mut touched = vec![false; nodes * kc];
    for (e, &(s, t)) in edges.iter().enumerate() {
        let (s, t) = (s as usize, t as usize);
        let xs = &x[s * cin..(s + 1) * cin];
        for b in 0..nb {
            let k = basis_idx[e * nb + b] as usize;
            let coef = basis_w[e * nb + b] * inv_deg[t];
            let slot = t * kc + k;
            touched[slot] = true;
            axpy(coef, xs, &mut z[slot * cin..(slot + 1) * cin]);
        }
    }

    let mut out = vec![T::zero(); nodes * cout];
    for i in 0..nodes {
        let oi = &mut out[i * cout..(i + 1) * cout];
        oi.copy_from_slice(bias);
        for a in 0..cin {
            axpy(x[i * cin + a], &root[a * cout..(a + 1) * cout], oi);
        }
    }
    // Kernel-major so each weight slice stays hot across nodes.
    for k in 0..kc {
        let wk = &w[k * cin * cout..(k + 1) * cin * cout];
        for i in 0..nodes {
            let slot = i * kc + k;
            if !touched[slot] {
                continue;
            }
            let oi = &mut out[i * cout..(i + 1) * cout];
            for a in 0..cin {
                let za = z[slot * cin + a];
                if za != T::zero() {
                    axpy(za, &wk[a * cout..(a + 1) * cout], oi);
                }
            }
        }
    }
    Ok((
        out,
        SplineCache {
            z,
            touched,
            basis_idx,
            basis_w,
            inv_deg,
        },
    ))
}

/// Accumulates parameter gradients into `grad_params` (same layout as the
/// parameter block) and returns the input gradient when asked.
#[allow(clippy::too_many_arguments)]
pub fn spline_conv_backward<T: Scalar>(
    g: &SplineGeometry,
    params: &[T],
    x: &[T],
    nodes: usize,
    edges: &[(u32, u32)],
    cache: &SplineCache<T>,
    grad_out: &[T],
    grad_params: &mut [T],
    want_input_grad: bool,
) -> Option<Vec<T>> {
    let (cin, cout) = (g.in_channels, g.out_channels);
    let nb = 1usize << g.kernel.len();
    let kc = g.kernel_count();
    let (w, root, _) = g.split(params);
    let nw = kc * cin * cout;
    let nr = cin * cout;
    let (gw, rest) = grad_params.split_at_mut(nw);
    let (groot, gbias) = rest.split_at_mut(nr);

    let mut gx = want_input_grad.then(|| vec![T::zero(); nodes * cin]);
    let mut gz = if want_input_grad {
        vec![T::zero(); nodes * kc * cin]
    } else {
        Vec::new()
    };

    for i in 0..nodes {
        let gi = &grad_out[i * cout..(i + 1) * cout];
        axpy(T::one(), gi, gbias);
        for a in 0..cin {
            let xa = x[i * cin + a];
            axpy(xa, gi, &mut groot[a * cout..(a + 1) * cout]);
            if let Some(gx) = gx.as_mut() {
                gx[i * cin + a] = gx[i * cin + a] + dot(&root[a * cout..(a + 1) * cout], gi);
            }
        }
    }
    for k in 0..kc {
        let base = k * cin * cout;
        for i in 0..nodes {
            let slot = i * kc + k;
            if !cache.touched[slot] {
                continue;
            }
            let gi = &grad_out[i * cout..(i + 1) * cout];
            for a in 0..cin {
                let za = cache.z[slot * cin + a];
                let off = base + a * cout;
                if za != T::zero() {
                    axpy(za, gi, &mut gw[off..off + cout]);
                }
                if want_input_grad {
                    gz[slot * cin + a] = dot(&w[off..off + cout], gi);
                }
            }
        }
    }

    if let Some(gx) = gx.as_mut() {
        for (e, &(s, t)) in edges.iter().enumerate() {
            let (s, t) = (s as usize, t as usize);
            for b in 0..nb {
                let k = cache.basis_idx[e * nb + b] as usize;
                let coef = cache.basis_w[e * nb + b] * cache.inv_deg[t];
                let slot = t * kc + k;
                axpy(
                    coef,
                    &gz[slot * cin..(slot + 1) * cin],
                    &mut gx[s * cin..(s + 1) * cin],
                );
            }
        }
    }
    gx
}

/// Componentwise mean over nodes.
pub fn global_mean_pool<T: Scalar>(x: &[T], nodes: usize, features: usize) -> Result<Vec<T>> {
    if nodes == 0 {
        return Err(Error::Structural(
            "global pooling over an empty graph".into(),
        ));
    }
    let mut out = vec![T::zero(); features];
    for row in x.chunks_exact(features) {
        axpy(T::one(), row, &mut out);
    }
    let inv = T::one() / T::of(nodes as f64);
    out.iter_mut().for_each(|v| *v = *v * inv);
    Ok(out)
}
