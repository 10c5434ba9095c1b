use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Array4, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;

use super::im2col::{col2im, from_channel_major, im2col, to_channel_major, Geometry};
use super::{Param, Parameterized, Real};

/// Square-kernel 2-D convolution with zero padding.
#[derive(Debug, Clone)]
pub struct Conv2d<F: Real> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    /// (out, in, k, k)
    pub weight: Param<F>,
    pub bias: Param<F>,
    cache: Option<(Array2<F>, Geometry, usize)>,
}

impl<F: Real> Conv2d<F> {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
            weight: Param::he_normal(&[out_channels, in_channels, kernel, kernel], fan_in, rng),
            bias: Param::zeros(&[out_channels]),
            cache: None,
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let g = Geometry::new(self.in_channels, h, w, self.kernel, self.stride, self.pad);
        (g.out_h, g.out_w)
    }

    fn weight_matrix(&self) -> ArrayView2<'_, F> {
        let k = self.in_channels * self.kernel * self.kernel;
        ArrayView2::from_shape((self.out_channels, k), &self.weight.value).unwrap()
    }

    fn run(&self, x: &Array4<F>) -> (Array4<F>, Array2<F>, Geometry) {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.in_channels, "conv input channels");
        let g = Geometry::new(c, h, w, self.kernel, self.stride, self.pad);
        let cols = im2col(x, &g);
        let mut out = Array2::<F>::zeros((self.out_channels, cols.ncols()));
        general_mat_mul(F::one(), &self.weight_matrix(), &cols, F::zero(), &mut out);
        for (mut row, &b) in out.axis_iter_mut(Axis(0)).zip(&self.bias.value) {
            row.mapv_inplace(|v| v + b);
        }
        (from_channel_major(&out, n, g.out_h, g.out_w), cols, g)
    }

    /// Forward pass without caching.
    pub fn infer(&self, x: &Array4<F>) -> Array4<F> {
        self.run(x).0
    }

    pub fn forward(&mut self, x: &Array4<F>) -> Array4<F> {
        let (y, cols, g) = self.run(x);
        self.cache = Some((cols, g, x.shape()[0]));
        y
    }

    pub fn backward(&mut self, grad: &Array4<F>) -> Array4<F> {
        let (cols, g, n) = self.cache.take().expect("conv backward without forward");
        let dout = to_channel_major(grad);
        let k = self.in_channels * self.kernel * self.kernel;
        {
            let mut dw =
                ArrayViewMut2::from_shape((self.out_channels, k), &mut self.weight.grad).unwrap();
            general_mat_mul(F::one(), &dout, &cols.t(), F::one(), &mut dw);
        }
        for (gb, row) in self.bias.grad.iter_mut().zip(dout.axis_iter(Axis(0))) {
            *gb = *gb + row.sum();
        }
        let mut dcols = Array2::<F>::zeros(cols.dim());
        general_mat_mul(
            F::one(),
            &self.weight_matrix().t(),
            &dout,
            F::zero(),
            &mut dcols,
        );
        col2im(&dcols, n, &g)
    }
}

impl<F: Real> Parameterized<F> for Conv2d<F> {
    fn params(&self) -> Vec<&Param<F>> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Transposed convolution (fractionally strided), weight layout (in, out, k, k).
#[derive(Debug, Clone)]
pub struct ConvTranspose2d<F: Real> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Param<F>,
    pub bias: Param<F>,
    cache: Option<(Array2<F>, usize, usize, usize)>,
}

impl<F: Real> ConvTranspose2d<F> {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut R,
    ) -> Self {
        // each output pixel receives about in * (k / stride)^2 taps
        let fan_in = in_channels * (kernel / stride).max(1).pow(2);
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
            weight: Param::he_normal(&[in_channels, out_channels, kernel, kernel], fan_in, rng),
            bias: Param::zeros(&[out_channels]),
            cache: None,
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h - 1) * self.stride + self.kernel - 2 * self.pad,
            (w - 1) * self.stride + self.kernel - 2 * self.pad,
        )
    }

    fn weight_matrix(&self) -> ArrayView2<'_, F> {
        let k = self.out_channels * self.kernel * self.kernel;
        ArrayView2::from_shape((self.in_channels, k), &self.weight.value).unwrap()
    }

    fn geometry(&self, h: usize, w: usize) -> Geometry {
        let (oh, ow) = self.output_hw(h, w);
        Geometry::with_grid(
            self.out_channels,
            oh,
            ow,
            self.kernel,
            self.stride,
            self.pad,
            h,
            w,
        )
    }

    fn run(&self, x: &Array4<F>) -> (Array4<F>, Array2<F>) {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.in_channels, "transposed conv input channels");
        let xm = to_channel_major(x);
        let mut cols =
            Array2::<F>::zeros((self.out_channels * self.kernel * self.kernel, xm.ncols()));
        general_mat_mul(
            F::one(),
            &self.weight_matrix().t(),
            &xm,
            F::zero(),
            &mut cols,
        );
        let mut y = col2im(&cols, n, &self.geometry(h, w));
        for mut sample in y.outer_iter_mut() {
            for (mut plane, &b) in sample.outer_iter_mut().zip(&self.bias.value) {
                plane.mapv_inplace(|v| v + b);
            }
        }
        (y, xm)
    }

    pub fn infer(&self, x: &Array4<F>) -> Array4<F> {
        self.run(x).0
    }

    pub fn forward(&mut self, x: &Array4<F>) -> Array4<F> {
        let (y, xm) = self.run(x);
        let (n, _, h, w) = x.dim();
        self.cache = Some((xm, n, h, w));
        y
    }

    pub fn backward(&mut self, grad: &Array4<F>) -> Array4<F> {
        let (xm, n, h, w) = self
            .cache
            .take()
            .expect("transposed conv backward without forward");
        let dcols = im2col(grad, &self.geometry(h, w));
        {
            let k = self.out_channels * self.kernel * self.kernel;
            let mut dw =
                ArrayViewMut2::from_shape((self.in_channels, k), &mut self.weight.grad).unwrap();
            general_mat_mul(F::one(), &xm, &dcols.t(), F::one(), &mut dw);
        }
        for (o, gb) in self.bias.grad.iter_mut().enumerate() {
            *gb = *gb + grad.index_axis(Axis(1), o).sum();
        }
        let mut dx = Array2::<F>::zeros((self.in_channels, dcols.ncols()));
        general_mat_mul(F::one(), &self.weight_matrix(), &dcols, F::zero(), &mut dx);
        from_channel_major(&dx, n, h, w)
    }
}

impl<F: Real> Parameterized<F> for ConvTranspose2d<F> {
    fn params(&self) -> Vec<&Param<F>> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
