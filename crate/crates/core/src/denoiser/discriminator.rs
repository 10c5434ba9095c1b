//! Strided convolutional critic reduced to one logit per image.
//!
//! Four stride-2 3x3 convolutions (64, 128, 256, 512 channels at full width)
//! with leaky rectifiers, a 1x1 head and a global average, so any frame size
//! yields a scalar.

use ndarray::{Array1, Array4};
use rand::Rng;

use super::DiscriminatorConfig;
use crate::nn::{
    leaky_relu, leaky_relu_backward, Conv2d, Dropout, InstanceNorm2d, Param, Parameterized, Real,
};

#[derive(Debug, Clone)]
pub struct Discriminator<F: Real> {
    pub config: DiscriminatorConfig,
    convs: [Conv2d<F>; 4],
    norms: [InstanceNorm2d<F>; 3],
    drops: [Dropout<F>; 3],
    head: Conv2d<F>,
    acts: Vec<Array4<F>>,
    head_hw: (usize, usize),
}

impl<F: Real> Discriminator<F> {
    pub fn new<R: Rng + ?Sized>(config: DiscriminatorConfig, rng: &mut R) -> Self {
        let [c1, c2, c3, c4] = config.channels();
        Self {
            config,
            convs: [
                Conv2d::new(1, c1, 3, 2, 1, rng),
                Conv2d::new(c1, c2, 3, 2, 1, rng),
                Conv2d::new(c2, c3, 3, 2, 1, rng),
                Conv2d::new(c3, c4, 3, 2, 1, rng),
            ],
            norms: [
                InstanceNorm2d::new(c2),
                InstanceNorm2d::new(c3),
                InstanceNorm2d::new(c4),
            ],
            drops: std::array::from_fn(|_| Dropout::new(config.dropout_rate)),
            head: Conv2d::new(c4, 1, 1, 1, 0, rng),
            acts: Vec::new(),
            head_hw: (0, 0),
        }
    }

    /// Spatial size after each strided convolution.
    pub fn stage_sizes(&self, h: usize, w: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let (mut h, mut w) = (h, w);
        for c in &self.convs {
            (h, w) = c.output_hw(h, w);
            out.push((h, w));
        }
        out
    }

    fn pool(map: &Array4<F>) -> Array1<F> {
        let (n, _, h, w) = map.dim();
        let inv = F::of(1.0 / (h * w) as f64);
        Array1::from_shape_fn(n, |b| map.index_axis(ndarray::Axis(0), b).sum() * inv)
    }

    pub fn infer(&self, x: &Array4<F>) -> Array1<F> {
        let s = self.config.leaky_slope;
        let mut h = leaky_relu(&self.convs[0].infer(x), s);
        for i in 0..3 {
            h = leaky_relu(&self.norms[i].infer(&self.convs[i + 1].infer(&h)), s);
        }
        Self::pool(&self.head.infer(&h))
    }

    /// Training pass with dropout drawn from `rng`.
    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Array4<F>, rng: &mut R) -> Array1<F> {
        let s = self.config.leaky_slope;
        self.acts.clear();
        let mut h = leaky_relu(&self.convs[0].forward(x), s);
        self.acts.push(h.clone());
        for i in 0..3 {
            let a = leaky_relu(&self.norms[i].forward(&self.convs[i + 1].forward(&h)), s);
            h = self.drops[i].forward(&a, rng);
            self.acts.push(a);
        }
        let map = self.head.forward(&h);
        self.head_hw = (map.shape()[2], map.shape()[3]);
        Self::pool(&map)
    }

    /// Gradient of the per-image logits back to the input frames.
    pub fn backward(&mut self, grad_logits: &Array1<F>) -> Array4<F> {
        let s = self.config.leaky_slope;
        let (h, w) = self.head_hw;
        let inv = F::of(1.0 / (h * w) as f64);
        let n = grad_logits.len();
        let gmap = Array4::from_shape_fn((n, 1, h, w), |(b, _, _, _)| grad_logits[b] * inv);
        let mut g = self.head.backward(&gmap);
        for i in (0..3).rev() {
            let g_act = self.drops[i].backward(&g);
            let g_pre = leaky_relu_backward(&self.acts[i + 1], &g_act, s);
            g = self.convs[i + 1].backward(&self.norms[i].backward(&g_pre));
        }
        let g_pre = leaky_relu_backward(&self.acts[0], &g, s);
        self.acts.clear();
        self.convs[0].backward(&g_pre)
    }
}

impl<F: Real> Parameterized<F> for Discriminator<F> {
    fn params(&self) -> Vec<&Param<F>> {
        let mut p = self.convs[0].params();
        for i in 0..3 {
            p.extend(self.convs[i + 1].params());
            p.extend(self.norms[i].params());
        }
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        let [c0, c1, c2, c3] = &mut self.convs;
        let [n0, n1, n2] = &mut self.norms;
        let mut p = c0.params_mut();
        p.extend(c1.params_mut());
        p.extend(n0.params_mut());
        p.extend(c2.params_mut());
        p.extend(n1.params_mut());
        p.extend(c3.params_mut());
        p.extend(n2.params_mut());
        p.extend(self.head.params_mut());
        p
    }
}

/// Convolution weights and biases only, from the layer table.
pub fn discriminator_conv_param_count(config: &DiscriminatorConfig) -> usize {
    let [c1, c2, c3, c4] = config.channels();
    let conv = |i: usize, o: usize, k: usize| i * o * k * k + o;
    conv(1, c1, 3) + conv(c1, c2, 3) + conv(c2, c3, 3) + conv(c3, c4, 3) + conv(c4, 1, 1)
}
