//! Dense, convolution and pooling kernels with their backward passes.
//!
//! Grid activations are channel-first `[c][z][y][x]`, x fastest. 2D grids
//! use `z = 1` and kernels with `kz = 1`. Convolution is valid-padding
//! cross-correlation with stride 1.

use super::Scalar;
use crate::volume::NUM_CLASSES;

/// `out[o] = b[o] + sum_i w[o][i] * x[i]`
pub fn dense_forward<T: Scalar>(w: &[T], b: &[T], x: &[T]) -> Vec<T> {
    let n_in = x.len();
    b.iter()
        .zip(w.chunks_exact(n_in))
        .map(|(&bo, row)| bo + dot(row, x))
        .collect()
}

/// Accumulates weight/bias gradients; returns the input gradient when asked.
pub fn dense_backward<T: Scalar>(
    w: &[T],
    x: &[T],
    grad_out: &[T],
    grad_w: &mut [T],
    grad_b: &mut [T],
    want_input_grad: bool,
) -> Option<Vec<T>> {
    let n_in = x.len();
    let mut gx = want_input_grad.then(|| vec![T::zero(); n_in]);
    for (o, &g) in grad_out.iter().enumerate() {
        grad_b[o] = grad_b[o] + g;
        if g == T::zero() {
            continue;
        }
        axpy(g, x, &mut grad_w[o * n_in..(o + 1) * n_in]);
        if let Some(gx) = gx.as_mut() {
            axpy(g, &w[o * n_in..(o + 1) * n_in], gx);
        }
    }
    gx
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    // Eight independent partial sums, combined in a fixed order.
    let n = a.len().min(b.len());
    let mut acc = [T::zero(); 8];
    let (ac, bc) = (a[..n].chunks_exact(8), b[..n].chunks_exact(8));
    let (ar, br) = (ac.remainder(), bc.remainder());
    for (x, y) in ac.zip(bc) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (&p, &q) in ar.iter().zip(br) {
        tail = tail + p * q;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub(crate) fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[x, y, z]`
    pub in_dims: [usize; 3],
    /// `[kx, ky, kz]`
    pub kernel: [usize; 3],
}

impl ConvGeometry {
    pub fn out_dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.in_dims[a] + 1 - self.kernel[a])
    }

    #[inline]
    fn widx(&self, o: usize, c: usize, dx: usize, dy: usize, dz: usize) -> usize {
        let [kx, ky, kz] = self.kernel;
        (((o * self.in_channels + c) * kz + dz) * ky + dy) * kx + dx
    }
}

/// Weights are `[out][in][kz][ky][kx]`.
pub fn conv_forward<T: Scalar>(g: &ConvGeometry, w: &[T], b: &[T], x: &[T]) -> Vec<T> {
    let [ix, iy, iz] = g.in_dims;
    let [ox, oy, oz] = g.out_dims();
    let [kx, ky, kz] = g.kernel;
    let in_vol = ix * iy * iz;
    let out_vol = ox * oy * oz;
    let mut out = vec![T::zero(); g.out_channels * out_vol];
    for (o, out_c) in out.chunks_exact_mut(out_vol).enumerate() {
        out_c.fill(b[o]);
        for c in 0..g.in_channels {
            let x_c = &x[c * in_vol..(c + 1) * in_vol];
            for dz in 0..kz {
                for dy in 0..ky {
                    for dx in 0..kx {
                        let wv = w[g.widx(o, c, dx, dy, dz)];
                        for z in 0..oz {
                            for y in 0..oy {
                                let s = ((z + dz) * iy + y + dy) * ix + dx;
                                let d = (z * oy + y) * ox;
                                axpy(wv, &x_c[s..s + ox], &mut out_c[d..d + ox]);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn conv_backward<T: Scalar>(
    g: &ConvGeometry,
    w: &[T],
    x: &[T],
    grad_out: &[T],
    grad_w: &mut [T],
    grad_b: &mut [T],
    want_input_grad: bool,
) -> Option<Vec<T>> {
    let [ix, iy, iz] = g.in_dims;
    let [ox, oy, oz] = g.out_dims();
    let [kx, ky, kz] = g.kernel;
    let in_vol = ix * iy * iz;
    let out_vol = ox * oy * oz;
    let mut gx = want_input_grad.then(|| vec![T::zero(); g.in_channels * in_vol]);
    for (o, go) in grad_out.chunks_exact(out_vol).enumerate() {
        grad_b[o] = grad_b[o] + go.iter().copied().sum::<T>();
        for c in 0..g.in_channels {
            let x_c = &x[c * in_vol..(c + 1) * in_vol];
            for dz in 0..kz {
                for dy in 0..ky {
                    for dx in 0..kx {
                        let wi = g.widx(o, c, dx, dy, dz);
                        let mut acc = T::zero();
                        for z in 0..oz {
                            for y in 0..oy {
                                let s = ((z + dz) * iy + y + dy) * ix + dx;
                                let d = (z * oy + y) * ox;
                                acc = acc + dot(&go[d..d + ox], &x_c[s..s + ox]);
                            }
                        }
                        grad_w[wi] = grad_w[wi] + acc;
                        if let Some(gx) = gx.as_mut() {
                            let wv = w[wi];
                            let gx_c = &mut gx[c * in_vol..(c + 1) * in_vol];
                            for z in 0..oz {
                                for y in 0..oy {
                                    let s = ((z + dz) * iy + y + dy) * ix + dx;
                                    let d = (z * oy + y) * ox;
                                    axpy(wv, &go[d..d + ox], &mut gx_c[s..s + ox]);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    gx
}

/// Non-overlapping max pooling; returns the pooled map and the flat input
/// index of each maximum (first maximum wins).
pub fn maxpool_forward<T: Scalar>(
    channels: usize,
    in_dims: [usize; 3],
    size: [usize; 3],
    x: &[T],
) -> (Vec<T>, Vec<u32>) {
    let [ix, iy, iz] = in_dims;
    let od = [0, 1, 2].map(|a| in_dims[a] / size[a]);
    let in_vol = ix * iy * iz;
    let n_out = channels * od.iter().product::<usize>();
    let mut out = Vec::with_capacity(n_out);
    let mut arg = Vec::with_capacity(n_out);
    for c in 0..channels {
        for z in 0..od[2] {
            for y in 0..od[1] {
                for xo in 0..od[0] {
                    let mut best = T::neg_infinity();
                    let mut bi = 0usize;
                    for pz in 0..size[2] {
                        for py in 0..size[1] {
                            for px in 0..size[0] {
                                let i = c * in_vol
                                    + ((z * size[2] + pz) * iy + y * size[1] + py) * ix
                                    + xo * size[0]
                                    + px;
                                if x[i] > best {
                                    best = x[i];
                                    bi = i;
                                }
                            }
                        }
                    }
                    out.push(best);
                    arg.push(bi as u32);
                }
            }
        }
    }
    (out, arg)
}

pub fn maxpool_backward<T: Scalar>(in_len: usize, argmax: &[u32], grad_out: &[T]) -> Vec<T> {
    let mut gx = vec![T::zero(); in_len];
    for (&i, &g) in argmax.iter().zip(grad_out) {
        gx[i as usize] = gx[i as usize] + g;
    }
    gx
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Max-shifted softmax followed by negative log-likelihood of `label`.
/// Returns the loss and its gradient with respect to the logits.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], label: usize) -> (T, Vec<T>) {
    debug_assert_eq!(logits.len(), NUM_CLASSES);
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    let loss = s.ln() - (logits[label] - m);
    let mut grad: Vec<T> = e.into_iter().map(|v| v / s).collect();
    grad[label] = grad[label] - T::one();
    (loss, grad)
}
