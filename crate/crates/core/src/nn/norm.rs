use ndarray::Array4;

use super::{Param, Parameterized, Real};

const EPS: f64 = 1e-5;

/// Per-sample, per-channel normalisation over the spatial plane with an
/// affine scale and shift.
#[derive(Debug, Clone)]
pub struct InstanceNorm2d<F: Real> {
    pub channels: usize,
    pub gamma: Param<F>,
    pub beta: Param<F>,
    cache: Option<(Array4<F>, Vec<F>)>,
}

impl<F: Real> InstanceNorm2d<F> {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::filled(&[channels], F::one()),
            beta: Param::zeros(&[channels]),
            cache: None,
        }
    }

    fn run(&self, x: &Array4<F>) -> (Array4<F>, Array4<F>, Vec<F>) {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.channels);
        let m = h * w;
        let inv_m = F::of(1.0 / m as f64);
        let mut xhat = x.as_standard_layout().into_owned();
        let mut inv_stds = Vec::with_capacity(n * c);
        let mut y = Array4::<F>::zeros((n, c, h, w));
        let ys = y.as_slice_mut().unwrap();
        let xs = xhat.as_slice_mut().unwrap();
        for (i, (plane, out)) in xs.chunks_mut(m).zip(ys.chunks_mut(m)).enumerate() {
            let ch = i % c;
            let mean = plane.iter().copied().sum::<F>() * inv_m;
            let var = plane.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() * inv_m;
            let inv_std = F::one() / (var + F::of(EPS)).sqrt();
            let (g, b) = (self.gamma.value[ch], self.beta.value[ch]);
            for (v, o) in plane.iter_mut().zip(out.iter_mut()) {
                *v = (*v - mean) * inv_std;
                *o = g * *v + b;
            }
            inv_stds.push(inv_std);
        }
        (y, xhat, inv_stds)
    }

    pub fn infer(&self, x: &Array4<F>) -> Array4<F> {
        self.run(x).0
    }

    pub fn forward(&mut self, x: &Array4<F>) -> Array4<F> {
        let (y, xhat, inv) = self.run(x);
        self.cache = Some((xhat, inv));
        y
    }

    pub fn backward(&mut self, grad: &Array4<F>) -> Array4<F> {
        let (xhat, inv_stds) = self.cache.take().expect("norm backward without forward");
        let (_, c, h, w) = grad.dim();
        let m = h * w;
        let mf = F::of(m as f64);
        let grad = grad.as_standard_layout();
        let gs = grad.as_slice().unwrap();
        let mut dx = Array4::<F>::zeros(xhat.dim());
        let ds = dx.as_slice_mut().unwrap();
        let xs = xhat.as_slice().unwrap();
        for (i, ((g, xh), d)) in gs
            .chunks(m)
            .zip(xs.chunks(m))
            .zip(ds.chunks_mut(m))
            .enumerate()
        {
            let ch = i % c;
            let gamma = self.gamma.value[ch];
            let mut sum_dy = F::zero();
            let mut sum_dy_xh = F::zero();
            for (&gy, &x) in g.iter().zip(xh) {
                sum_dy = sum_dy + gy;
                sum_dy_xh = sum_dy_xh + gy * x;
            }
            self.beta.grad[ch] = self.beta.grad[ch] + sum_dy;
            self.gamma.grad[ch] = self.gamma.grad[ch] + sum_dy_xh;
            let scale = gamma * inv_stds[i] / mf;
            for ((o, &gy), &x) in d.iter_mut().zip(g).zip(xh) {
                *o = scale * (mf * gy - sum_dy - x * sum_dy_xh);
            }
        }
        dx
    }
}

impl<F: Real> Parameterized<F> for InstanceNorm2d<F> {
    fn params(&self) -> Vec<&Param<F>> {
        vec![&self.gamma, &self.beta]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        vec![&mut self.gamma, &mut self.beta]
    }
}
