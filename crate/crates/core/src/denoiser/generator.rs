//! Encoder / residual / decoder generator with concatenation skips.
//!
//! | layer | kernel             | output            |
//! |-------|--------------------|-------------------|
//! | Enc1  | 3x3, 1 -> c1, s1   | H x W x c1        |
//! | Enc2  | 3x3, c1 -> c2, s2  | H/2 x W/2 x c2    |
//! | Enc3  | 3x3, c2 -> c3, s2  | H/4 x W/4 x c3    |
//! | Res   | 3 x (two 3x3 c3)   | H/4 x W/4 x c3    |
//! | Dec3  | 4x4^T, c3 -> c2    | H/2 x W/2 x c2    |
//! | Dec2  | 4x4^T, 2c2 -> c1   | H x W x c1        |
//! | Dec1  | 3x3, 2c1 -> 1      | H x W x 1, linear |
//!
//! with (c1, c2, c3) = (64, 128, 256) at full width.

use ndarray::Array4;
use rand::Rng;

use super::GeneratorConfig;
use crate::nn::{
    concat_channels, relu, relu_backward, split_channels, Conv2d, ConvTranspose2d, InstanceNorm2d,
    Param, Parameterized, Real,
};

#[derive(Debug, Clone)]
struct ResidualBlock<F: Real> {
    conv_a: Conv2d<F>,
    norm_a: InstanceNorm2d<F>,
    conv_b: Conv2d<F>,
    norm_b: InstanceNorm2d<F>,
    hidden: Option<Array4<F>>,
}

impl<F: Real> ResidualBlock<F> {
    fn new<R: Rng + ?Sized>(c: usize, rng: &mut R) -> Self {
        Self {
            conv_a: Conv2d::new(c, c, 3, 1, 1, rng),
            norm_a: InstanceNorm2d::new(c),
            conv_b: Conv2d::new(c, c, 3, 1, 1, rng),
            norm_b: InstanceNorm2d::new(c),
            hidden: None,
        }
    }

    fn infer(&self, x: &Array4<F>) -> Array4<F> {
        let a = relu(&self.norm_a.infer(&self.conv_a.infer(x)));
        x + &self.norm_b.infer(&self.conv_b.infer(&a))
    }

    fn forward(&mut self, x: &Array4<F>) -> Array4<F> {
        let a = relu(&self.norm_a.forward(&self.conv_a.forward(x)));
        let y = x + &self.norm_b.forward(&self.conv_b.forward(&a));
        self.hidden = Some(a);
        y
    }

    fn backward(&mut self, g: &Array4<F>) -> Array4<F> {
        let a = self
            .hidden
            .take()
            .expect("residual backward without forward");
        let ga = relu_backward(&a, &self.conv_b.backward(&self.norm_b.backward(g)));
        g + &self.conv_a.backward(&self.norm_a.backward(&ga))
    }

    fn params(&self) -> Vec<&Param<F>> {
        let mut p = self.conv_a.params();
        p.extend(self.norm_a.params());
        p.extend(self.conv_b.params());
        p.extend(self.norm_b.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        let mut p = self.conv_a.params_mut();
        p.extend(self.norm_a.params_mut());
        p.extend(self.conv_b.params_mut());
        p.extend(self.norm_b.params_mut());
        p
    }
}

#[derive(Debug, Clone, Default)]
struct Activations<F: Real> {
    e1: Array4<F>,
    e2: Array4<F>,
    e3: Array4<F>,
    d3: Array4<F>,
    d2: Array4<F>,
}

#[derive(Debug, Clone)]
pub struct Generator<F: Real> {
    pub config: GeneratorConfig,
    enc1: Conv2d<F>,
    enc2: Conv2d<F>,
    norm2: InstanceNorm2d<F>,
    enc3: Conv2d<F>,
    norm3: InstanceNorm2d<F>,
    blocks: Vec<ResidualBlock<F>>,
    dec3: ConvTranspose2d<F>,
    norm_d3: InstanceNorm2d<F>,
    dec2: ConvTranspose2d<F>,
    norm_d2: InstanceNorm2d<F>,
    dec1: Conv2d<F>,
    acts: Option<Activations<F>>,
}

impl<F: Real> Generator<F> {
    pub fn new<R: Rng + ?Sized>(config: GeneratorConfig, rng: &mut R) -> Self {
        let [c1, c2, c3] = config.channels();
        Self {
            config,
            enc1: Conv2d::new(1, c1, 3, 1, 1, rng),
            enc2: Conv2d::new(c1, c2, 3, 2, 1, rng),
            norm2: InstanceNorm2d::new(c2),
            enc3: Conv2d::new(c2, c3, 3, 2, 1, rng),
            norm3: InstanceNorm2d::new(c3),
            blocks: (0..config.residual_blocks)
                .map(|_| ResidualBlock::new(c3, rng))
                .collect(),
            dec3: ConvTranspose2d::new(c3, c2, 4, 2, 1, rng),
            norm_d3: InstanceNorm2d::new(c2),
            dec2: ConvTranspose2d::new(2 * c2, c1, 4, 2, 1, rng),
            norm_d2: InstanceNorm2d::new(c1),
            // linear output layer starts near the identity scale of the target
            dec1: {
                let mut d = Conv2d::new(2 * c1, 1, 3, 1, 1, rng);
                for w in &mut d.weight.value {
                    *w = *w * F::of(0.1);
                }
                d
            },
            acts: None,
        }
    }

    /// Output shape of every layer for an `h x w` input, as (name, [h, w, c]).
    pub fn layer_shapes(&self, h: usize, w: usize) -> Vec<(&'static str, [usize; 3])> {
        let [c1, c2, c3] = self.config.channels();
        let (h2, w2) = self.enc2.output_hw(h, w);
        let (h4, w4) = self.enc3.output_hw(h2, w2);
        let (hd3, wd3) = self.dec3.output_hw(h4, w4);
        let (hd2, wd2) = self.dec2.output_hw(hd3, wd3);
        vec![
            ("enc1", [h, w, c1]),
            ("enc2", [h2, w2, c2]),
            ("enc3", [h4, w4, c3]),
            ("residual", [h4, w4, c3]),
            ("dec3", [hd3, wd3, c2]),
            ("dec2", [hd2, wd2, c1]),
            ("dec1", [hd2, wd2, 1]),
        ]
    }

    /// Stateless forward pass; input dims must be multiples of 4.
    pub fn infer(&self, x: &Array4<F>) -> Array4<F> {
        let e1 = relu(&self.enc1.infer(x));
        let e2 = relu(&self.norm2.infer(&self.enc2.infer(&e1)));
        let mut h = relu(&self.norm3.infer(&self.enc3.infer(&e2)));
        for b in &self.blocks {
            h = b.infer(&h);
        }
        let d3 = relu(&self.norm_d3.infer(&self.dec3.infer(&h)));
        let d2 = relu(
            &self
                .norm_d2
                .infer(&self.dec2.infer(&concat_channels(&d3, &e2))),
        );
        self.dec1.infer(&concat_channels(&d2, &e1))
    }

    /// Training forward pass; caches what [`Generator::backward`] needs.
    pub fn forward(&mut self, x: &Array4<F>) -> Array4<F> {
        let e1 = relu(&self.enc1.forward(x));
        let e2 = relu(&self.norm2.forward(&self.enc2.forward(&e1)));
        let e3 = relu(&self.norm3.forward(&self.enc3.forward(&e2)));
        let mut h = e3.clone();
        for b in &mut self.blocks {
            h = b.forward(&h);
        }
        let d3 = relu(&self.norm_d3.forward(&self.dec3.forward(&h)));
        let d2 = relu(
            &self
                .norm_d2
                .forward(&self.dec2.forward(&concat_channels(&d3, &e2))),
        );
        let out = self.dec1.forward(&concat_channels(&d2, &e1));
        self.acts = Some(Activations { e1, e2, e3, d3, d2 });
        out
    }

    /// Accumulates parameter gradients; returns the input gradient.
    pub fn backward(&mut self, grad: &Array4<F>) -> Array4<F> {
        let a = self
            .acts
            .take()
            .expect("generator backward without forward");
        let [c1, c2, _] = self.config.channels();
        let (g_d2, g_e1_skip) = split_channels(&self.dec1.backward(grad), c1);
        let g = self
            .dec2
            .backward(&self.norm_d2.backward(&relu_backward(&a.d2, &g_d2)));
        let (g_d3, g_e2_skip) = split_channels(&g, c2);
        let mut g = self
            .dec3
            .backward(&self.norm_d3.backward(&relu_backward(&a.d3, &g_d3)));
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(&g);
        }
        let g_e2 = self
            .enc3
            .backward(&self.norm3.backward(&relu_backward(&a.e3, &g)))
            + g_e2_skip;
        let g_e1 = self
            .enc2
            .backward(&self.norm2.backward(&relu_backward(&a.e2, &g_e2)))
            + g_e1_skip;
        self.enc1.backward(&relu_backward(&a.e1, &g_e1))
    }

    pub fn cast<G: Real>(&self) -> Generator<G> {
        let mut rng = crate::seed::rng(0);
        let mut out = Generator::<G>::new(self.config, &mut rng);
        let flat: Vec<G> = self
            .flat_values()
            .iter()
            .map(|v| G::of(v.to_f64().unwrap()))
            .collect();
        out.load_flat(&flat).expect("same architecture");
        out
    }
}

impl<F: Real> Parameterized<F> for Generator<F> {
    fn params(&self) -> Vec<&Param<F>> {
        let mut p = self.enc1.params();
        p.extend(self.enc2.params());
        p.extend(self.norm2.params());
        p.extend(self.enc3.params());
        p.extend(self.norm3.params());
        for b in &self.blocks {
            p.extend(b.params());
        }
        p.extend(self.dec3.params());
        p.extend(self.norm_d3.params());
        p.extend(self.dec2.params());
        p.extend(self.norm_d2.params());
        p.extend(self.dec1.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        let mut p = self.enc1.params_mut();
        p.extend(self.enc2.params_mut());
        p.extend(self.norm2.params_mut());
        p.extend(self.enc3.params_mut());
        p.extend(self.norm3.params_mut());
        for b in &mut self.blocks {
            p.extend(b.params_mut());
        }
        p.extend(self.dec3.params_mut());
        p.extend(self.norm_d3.params_mut());
        p.extend(self.dec2.params_mut());
        p.extend(self.norm_d2.params_mut());
        p.extend(self.dec1.params_mut());
        p
    }
}

/// Trainable parameter count from layer shapes alone.
pub fn generator_param_count(config: &GeneratorConfig) -> usize {
    let [c1, c2, c3] = config.channels();
    let conv = |i: usize, o: usize, k: usize| i * o * k * k + o;
    let norm = |c: usize| 2 * c;
    conv(1, c1, 3)
        + conv(c1, c2, 3)
        + norm(c2)
        + conv(c2, c3, 3)
        + norm(c3)
        + config.residual_blocks * 2 * (conv(c3, c3, 3) + norm(c3))
        + conv(c3, c2, 4)
        + norm(c2)
        + conv(2 * c2, c1, 4)
        + norm(c1)
        + conv(2 * c1, 1, 3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn analytic_count_matches_model() {
        for w in [0.05, 0.25, 1.0] {
            let cfg = GeneratorConfig::with_width(w);
            let g = Generator::<f32>::new(cfg, &mut seed::rng(0));
            assert_eq!(g.num_params(), generator_param_count(&cfg));
        }
    }

    #[test]
    fn full_width_count_near_reported_size() {
        let n = generator_param_count(&GeneratorConfig::default());
        assert!((4_600_000..=4_800_000).contains(&n), "{n}");
        assert!((n as f64 - 4.7e6).abs() <= 0.1e6);
    }

    #[test]
    fn quarter_width_scales_quadratically() {
        let full = generator_param_count(&GeneratorConfig::default()) as f64;
        let quarter = generator_param_count(&GeneratorConfig::with_width(0.25)) as f64;
        assert!((quarter / (0.0625 * full) - 1.0).abs() < 0.1);
    }

    #[test]
    fn shapes_for_28_and_32() {
        let g = Generator::<f32>::new(GeneratorConfig::with_width(0.25), &mut seed::rng(0));
        let s = g.layer_shapes(28, 28);
        assert_eq!(s[1].1[..2], [14, 14]);
        assert_eq!(s[2].1[..2], [7, 7]);
        let y = g.infer(&Array4::zeros((2, 1, 32, 32)));
        assert_eq!(y.dim(), (2, 1, 32, 32));
        let y = g.infer(&Array4::zeros((1, 1, 28, 28)));
        assert_eq!(y.dim(), (1, 1, 28, 28));
    }

    #[test]
    fn backward_input_gradient_matches_finite_difference() {
        let mut g = Generator::<f64>::new(GeneratorConfig::with_width(0.05), &mut seed::rng(3));
        let x = Array4::from_shape_fn((2, 1, 8, 8), |(a, _, c, d)| {
            ((a * 5 + c * 3 + d * 7) % 13) as f64 / 13.0
        });
        let y = g.forward(&x);
        let r = Array4::from_shape_fn(y.dim(), |(a, _, c, d)| ((a + c * 2 + d) % 5) as f64 - 2.0);
        let gx = g.backward(&r);
        let eps = 1e-6;
        for idx in [0usize, 19, 64, 101] {
            let mut xp = x.clone();
            xp.as_slice_mut().unwrap()[idx] += eps;
            let mut xm = x.clone();
            xm.as_slice_mut().unwrap()[idx] -= eps;
            let fd = ((&g.infer(&xp) * &r).sum() - (&g.infer(&xm) * &r).sum()) / (2.0 * eps);
            let an = gx.as_slice().unwrap()[idx];
            assert!((fd - an).abs() < 1e-5 * (1.0 + fd.abs()), "{fd} vs {an}");
        }
    }
}
