//! Convolution, pooling and dense kernels over flat `C × H × W` buffers.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::Float;

/// Scalar type of the network: `f32` for training, `f64` for gradient checks.
pub trait Real: Float + AddAssign + Sum + Debug + Default + Send + Sync + 'static {}
impl<T: Float + AddAssign + Sum + Debug + Default + Send + Sync + 'static> Real for T {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn weights(&self) -> usize {
        self.out_c * self.in_c * self.kernel * self.kernel
    }

    pub fn out_shape(&self, input: Shape) -> Shape {
        Shape {
            c: self.out_c,
            h: (input.h + 2 * self.pad - self.kernel) / self.stride + 1,
            w: (input.w + 2 * self.pad - self.kernel) / self.stride + 1,
        }
    }

    /// Output columns `ox` whose input column `ox*s + kx - p` lies in `[0, w)`.
    fn valid_range(&self, kx: usize, out_w: usize, in_w: usize) -> (usize, usize) {
        let (s, p) = (self.stride, self.pad);
        let lo = if kx >= p { 0 } else { (p - kx).div_ceil(s) };
        let hi_excl = if in_w + p > kx {
            ((in_w - 1 + p - kx) / s + 1).min(out_w)
        } else {
            0
        };
        (lo, hi_excl.max(lo))
    }
}

/// `y = W * x + b` (cross-correlation), no activation.
pub fn conv_forward<T: Real>(g: &ConvGeom, x: &[T], xs: Shape, w: &[T], b: &[T], y: &mut [T]) -> Shape {
    let ys = g.out_shape(xs);
    let (k, s, p) = (g.kernel, g.stride, g.pad);
    for oc in 0..g.out_c {
        let yo = &mut y[oc * ys.h * ys.w..(oc + 1) * ys.h * ys.w];
        yo.fill(b[oc]);
        for ic in 0..g.in_c {
            let xi = &x[ic * xs.h * xs.w..(ic + 1) * xs.h * xs.w];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = w[((oc * g.in_c + ic) * k + ky) * k + kx];
                    let (lo, hi) = g.valid_range(kx, ys.w, xs.w);
                    for oy in 0..ys.h {
                        let iy = (oy * s + ky) as isize - p as isize;
                        if iy < 0 || iy >= xs.h as isize {
                            continue;
                        }
                        let xrow = &xi[iy as usize * xs.w..(iy as usize + 1) * xs.w];
                        let yrow = &mut yo[oy * ys.w..(oy + 1) * ys.w];
                        if s == 1 {
                            let off = kx as isize - p as isize;
                            for ox in lo..hi {
                                yrow[ox] += wv * xrow[(ox as isize + off) as usize];
                            }
                        } else {
                            for ox in lo..hi {
                                yrow[ox] += wv * xrow[ox * s + kx - p];
                            }
                        }
                    }
                }
            }
        }
    }
    ys
}

/// Accumulates `dW`, `db` and (optionally) `dx` from `dy`.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<T: Real>(
    g: &ConvGeom,
    x: &[T],
    xs: Shape,
    w: &[T],
    dy: &[T],
    dw: &mut [T],
    db: &mut [T],
    mut dx: Option<&mut [T]>,
) {
    let ys = g.out_shape(xs);
    let (k, s, p) = (g.kernel, g.stride, g.pad);
    for oc in 0..g.out_c {
        let dyo = &dy[oc * ys.h * ys.w..(oc + 1) * ys.h * ys.w];
        db[oc] += dyo.iter().copied().sum();
        for ic in 0..g.in_c {
            let plane = ic * xs.h * xs.w..(ic + 1) * xs.h * xs.w;
            let xi = &x[plane.clone()];
            for ky in 0..k {
                for kx in 0..k {
                    let widx = ((oc * g.in_c + ic) * k + ky) * k + kx;
                    let wv = w[widx];
                    let (lo, hi) = g.valid_range(kx, ys.w, xs.w);
                    let mut acc = T::zero();
                    for oy in 0..ys.h {
                        let iy = (oy * s + ky) as isize - p as isize;
                        if iy < 0 || iy >= xs.h as isize {
                            continue;
                        }
                        let iy = iy as usize;
                        let xrow = &xi[iy * xs.w..(iy + 1) * xs.w];
                        let dyrow = &dyo[oy * ys.w..(oy + 1) * ys.w];
                        for ox in lo..hi {
                            acc += dyrow[ox] * xrow[ox * s + kx - p];
                        }
                        if let Some(dx) = dx.as_deref_mut() {
                            let dxrow = &mut dx[plane.start + iy * xs.w..plane.start + (iy + 1) * xs.w];
                            for ox in lo..hi {
                                dxrow[ox * s + kx - p] += wv * dyrow[ox];
                            }
                        }
                    }
                    dw[widx] += acc;
                }
            }
        }
    }
}

/// 3×3 max-pool, stride 2, padding 1. Returns the argmax input index of
/// every output element.
pub fn maxpool_forward<T: Real>(x: &[T], xs: Shape, y: &mut [T]) -> (Shape, Vec<u32>) {
    let ys = Shape {
        c: xs.c,
        h: (xs.h - 1) / 2 + 1,
        w: (xs.w - 1) / 2 + 1,
    };
    let mut arg = vec![0u32; ys.len()];
    for c in 0..xs.c {
        for oy in 0..ys.h {
            for ox in 0..ys.w {
                let mut best = T::neg_infinity();
                let mut best_i = 0;
                for dy in 0..3 {
                    let iy = (oy * 2 + dy) as isize - 1;
                    if iy < 0 || iy >= xs.h as isize {
                        continue;
                    }
                    for dx in 0..3 {
                        let ix = (ox * 2 + dx) as isize - 1;
                        if ix < 0 || ix >= xs.w as isize {
                            continue;
                        }
                        let i = (c * xs.h + iy as usize) * xs.w + ix as usize;
                        if x[i] > best {
                            best = x[i];
                            best_i = i;
                        }
                    }
                }
                let o = (c * ys.h + oy) * ys.w + ox;
                y[o] = best;
                arg[o] = best_i as u32;
            }
        }
    }
    (ys, arg)
}

pub fn relu_inplace<T: Real>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

/// Zeroes gradient entries where the ReLU output was not positive.
pub fn relu_backward<T: Real>(out: &[T], grad: &mut [T]) {
    for (g, &o) in grad.iter_mut().zip(out) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straightforward zero-padded convolution used as a reference.
    fn conv_naive(g: &ConvGeom, x: &[f64], xs: Shape, w: &[f64], b: &[f64]) -> Vec<f64> {
        let ys = g.out_shape(xs);
        let mut y = vec![0.0; ys.len()];
        for oc in 0..g.out_c {
            for oy in 0..ys.h {
                for ox in 0..ys.w {
                    let mut acc = b[oc];
                    for ic in 0..g.in_c {
                        for ky in 0..g.kernel {
                            for kx in 0..g.kernel {
                                let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                                let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < xs.h && (ix as usize) < xs.w {
                                    acc += w[((oc * g.in_c + ic) * g.kernel + ky) * g.kernel + kx]
                                        * x[(ic * xs.h + iy as usize) * xs.w + ix as usize];
                                }
                            }
                        }
                    }
                    y[(oc * ys.h + oy) * ys.w + ox] = acc;
                }
            }
        }
        y
    }

    #[test]
    fn conv_matches_naive() {
        for (stride, kernel, pad) in [(1, 3, 1), (2, 3, 1), (1, 1, 0), (2, 1, 0)] {
            let g = ConvGeom {
                in_c: 2,
                out_c: 3,
                kernel,
                stride,
                pad,
            };
            let xs = Shape { c: 2, h: 7, w: 6 };
            let x: Vec<f64> = (0..xs.len()).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.1).collect();
            let w: Vec<f64> = (0..g.weights()).map(|i| ((i * 13 % 7) as f64 - 3.0) * 0.2).collect();
            let b = vec![0.1, -0.2, 0.3];
            let ys = g.out_shape(xs);
            let mut y = vec![0.0; ys.len()];
            conv_forward(&g, &x, xs, &w, &b, &mut y);
            let want = conv_naive(&g, &x, xs, &w, &b);
            for (a, e) in y.iter().zip(&want) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pool_halves_even_shapes() {
        let xs = Shape { c: 1, h: 4, w: 6 };
        let x: Vec<f64> = (0..24).map(|i| i as f64).collect();
        let mut y = vec![0.0; 6];
        let (ys, arg) = maxpool_forward(&x, xs, &mut y);
        assert_eq!((ys.h, ys.w), (2, 3));
        assert_eq!(y, vec![7.0, 9.0, 11.0, 19.0, 21.0, 23.0]);
        assert_eq!(arg[0], 7);
    }
}
