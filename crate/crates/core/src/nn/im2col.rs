//! Patch unfolding for convolution as matrix multiplication.
//!
//! Column index is `n * out_h * out_w + oy * out_w + ox`, row index is
//! `c * k * k + ky * k + kx`. Out-of-bounds taps read as zero.

use ndarray::{Array2, Array4};

use super::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Geometry {
    pub channels: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl Geometry {
    pub fn new(channels: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Self {
        let out_h = (h + 2 * pad - k) / stride + 1;
        let out_w = (w + 2 * pad - k) / stride + 1;
        Self {
            channels,
            h,
            w,
            k,
            stride,
            pad,
            out_h,
            out_w,
        }
    }

    /// Geometry of the image `h x w` whose unfolding has a patch grid of
    /// exactly `grid_h x grid_w`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_grid(
        channels: usize,
        h: usize,
        w: usize,
        k: usize,
        stride: usize,
        pad: usize,
        grid_h: usize,
        grid_w: usize,
    ) -> Self {
        Self {
            channels,
            h,
            w,
            k,
            stride,
            pad,
            out_h: grid_h,
            out_w: grid_w,
        }
    }

    fn tap(&self, o: usize, kk: usize, extent: usize) -> Option<usize> {
        let pos = (o * self.stride + kk) as isize - self.pad as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }
}

pub(crate) fn im2col<F: Real>(x: &Array4<F>, g: &Geometry) -> Array2<F> {
    let n = x.shape()[0];
    let x = x.as_standard_layout();
    let xs = x.as_slice().unwrap();
    let rows = g.channels * g.k * g.k;
    let plane = g.out_h * g.out_w;
    let ncols = n * plane;
    let mut cols = Array2::<F>::zeros((rows, ncols));
    let cs = cols.as_slice_mut().unwrap();
    for c in 0..g.channels {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let dst = &mut cs[row * ncols..(row + 1) * ncols];
                for b in 0..n {
                    let src = &xs[(b * g.channels + c) * g.h * g.w..][..g.h * g.w];
                    for oy in 0..g.out_h {
                        let Some(iy) = g.tap(oy, ky, g.h) else {
                            continue;
                        };
                        let base = b * plane + oy * g.out_w;
                        for ox in 0..g.out_w {
                            if let Some(ix) = g.tap(ox, kx, g.w) {
                                dst[base + ox] = src[iy * g.w + ix];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

pub(crate) fn col2im<F: Real>(cols: &Array2<F>, n: usize, g: &Geometry) -> Array4<F> {
    let mut x = Array4::<F>::zeros((n, g.channels, g.h, g.w));
    let plane = g.out_h * g.out_w;
    let ncols = n * plane;
    let cols = cols.as_standard_layout();
    let cs = cols.as_slice().unwrap();
    let xs = x.as_slice_mut().unwrap();
    for c in 0..g.channels {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let src = &cs[row * ncols..(row + 1) * ncols];
                for b in 0..n {
                    let dst = &mut xs[(b * g.channels + c) * g.h * g.w..][..g.h * g.w];
                    for oy in 0..g.out_h {
                        let Some(iy) = g.tap(oy, ky, g.h) else {
                            continue;
                        };
                        let base = b * plane + oy * g.out_w;
                        for ox in 0..g.out_w {
                            if let Some(ix) = g.tap(ox, kx, g.w) {
                                dst[iy * g.w + ix] = dst[iy * g.w + ix] + src[base + ox];
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

/// (N, C, H, W) -> (C, N*H*W)
pub(crate) fn to_channel_major<F: Real>(x: &Array4<F>) -> Array2<F> {
    let (n, c, h, w) = x.dim();
    let plane = h * w;
    let mut out = Array2::<F>::zeros((c, n * plane));
    let x = x.as_standard_layout();
    let xs = x.as_slice().unwrap();
    let os = out.as_slice_mut().unwrap();
    for b in 0..n {
        for ch in 0..c {
            let src = &xs[(b * c + ch) * plane..][..plane];
            os[ch * n * plane + b * plane..][..plane].copy_from_slice(src);
        }
    }
    out
}

/// (C, N*H*W) -> (N, C, H, W)
pub(crate) fn from_channel_major<F: Real>(
    m: &Array2<F>,
    n: usize,
    h: usize,
    w: usize,
) -> Array4<F> {
    let c = m.nrows();
    let plane = h * w;
    let mut out = Array4::<F>::zeros((n, c, h, w));
    let m = m.as_standard_layout();
    let ms = m.as_slice().unwrap();
    let os = out.as_slice_mut().unwrap();
    for b in 0..n {
        for ch in 0..c {
            os[(b * c + ch) * plane..][..plane]
                .copy_from_slice(&ms[ch * n * plane + b * plane..][..plane]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)> for any x, y
        let g = Geometry::new(2, 5, 6, 3, 2, 1);
        let x = Array4::from_shape_fn((2, 2, 5, 6), |(a, b, c, d)| {
            ((a * 7 + b * 5 + c * 3 + d) % 11) as f64 - 5.0
        });
        let cols = im2col(&x, &g);
        let y = Array2::from_shape_fn(cols.dim(), |(i, j)| ((i * 13 + j * 7) % 17) as f64 - 8.0);
        let lhs: f64 = (&cols * &y).sum();
        let back = col2im(&y, 2, &g);
        let rhs: f64 = (&x * &back).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn channel_major_round_trip() {
        let x = Array4::from_shape_fn((3, 2, 2, 3), |(a, b, c, d)| {
            (a * 100 + b * 10 + c * 3 + d) as f32
        });
        let m = to_channel_major(&x);
        assert_eq!(m.dim(), (2, 18));
        assert_eq!(from_channel_major(&m, 3, 2, 3), x);
    }
}
