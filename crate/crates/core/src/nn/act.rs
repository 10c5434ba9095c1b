use ndarray::{Array, Dimension, Zip};
use rand::Rng;

use super::Real;

pub fn relu<F: Real, D: Dimension>(x: &Array<F, D>) -> Array<F, D> {
    x.mapv(|v| v.max(F::zero()))
}

/// Gradient through a rectifier given its output.
pub fn relu_backward<F: Real, D: Dimension>(out: &Array<F, D>, grad: &Array<F, D>) -> Array<F, D> {
    let mut g = grad.clone();
    Zip::from(&mut g).and(out).for_each(|g, &o| {
        if o <= F::zero() {
            *g = F::zero();
        }
    });
    g
}

pub fn leaky_relu<F: Real, D: Dimension>(x: &Array<F, D>, slope: f64) -> Array<F, D> {
    let s = F::of(slope);
    x.mapv(|v| if v > F::zero() { v } else { v * s })
}

/// Gradient through a leaky rectifier given its output (sign is preserved).
pub fn leaky_relu_backward<F: Real, D: Dimension>(
    out: &Array<F, D>,
    grad: &Array<F, D>,
    slope: f64,
) -> Array<F, D> {
    let s = F::of(slope);
    let mut g = grad.clone();
    Zip::from(&mut g).and(out).for_each(|g, &o| {
        if o <= F::zero() {
            *g = *g * s;
        }
    });
    g
}

/// Inverted dropout; the mask of the last training pass is kept for backward.
#[derive(Debug, Clone)]
pub struct Dropout<F: Real> {
    pub rate: f64,
    mask: Option<Vec<F>>,
}

impl<F: Real> Dropout<F> {
    pub fn new(rate: f64) -> Self {
        Self { rate, mask: None }
    }

    pub fn forward<D: Dimension, R: Rng + ?Sized>(
        &mut self,
        x: &Array<F, D>,
        rng: &mut R,
    ) -> Array<F, D> {
        if self.rate <= 0.0 {
            self.mask = None;
            return x.clone();
        }
        let keep = 1.0 - self.rate;
        let scale = F::of(1.0 / keep);
        let mask: Vec<F> = (0..x.len())
            .map(|_| {
                if rng.random::<f64>() < keep {
                    scale
                } else {
                    F::zero()
                }
            })
            .collect();
        let mut y = x.as_standard_layout().into_owned();
        for (v, m) in y.iter_mut().zip(&mask) {
            *v = *v * *m;
        }
        self.mask = Some(mask);
        y
    }

    pub fn backward<D: Dimension>(&mut self, grad: &Array<F, D>) -> Array<F, D> {
        match self.mask.take() {
            None => grad.clone(),
            Some(mask) => {
                let mut g = grad.as_standard_layout().into_owned();
                for (v, m) in g.iter_mut().zip(&mask) {
                    *v = *v * *m;
                }
                g
            }
        }
    }
}
