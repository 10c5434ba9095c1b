//! Minimal CPU neural-network engine.
//!
//! Layers own their parameters and the activations cached by the last
//! training-mode forward pass; `backward` consumes that cache, accumulates
//! parameter gradients and returns the gradient with respect to the input.
//! Everything is generic over [`Real`] so the same layers run in `f32` for
//! training and in `f64` for finite-difference gradient checks.

mod act;
mod adam;
mod conv;
mod dense;
mod im2col;
mod norm;

pub use act::{leaky_relu, leaky_relu_backward, relu, relu_backward, Dropout};
pub use adam::{Adam, AdamConfig};
pub use conv::{Conv2d, ConvTranspose2d};
pub use dense::Dense;
pub use norm::InstanceNorm2d;

use std::fmt::Debug;

use ndarray::{Array4, Axis, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point element type usable by the engine.
pub trait Real:
    LinalgScalar
    + Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + Debug
    + Default
    + Send
    + Sync
    + std::iter::Sum
    + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Trainable tensor stored flat, with a gradient accumulator of equal length.
#[derive(Debug, Clone)]
pub struct Param<F: Real> {
    pub value: Vec<F>,
    pub grad: Vec<F>,
    pub shape: Vec<usize>,
}

impl<F: Real> Param<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            value: vec![F::zero(); n],
            grad: vec![F::zero(); n],
            shape: shape.to_vec(),
        }
    }

    pub fn filled(shape: &[usize], v: F) -> Self {
        let mut p = Self::zeros(shape);
        p.value.fill(v);
        p
    }

    /// He-normal initialisation with the given fan-in.
    pub fn he_normal<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Self {
        let std = (2.0 / fan_in.max(1) as f64).sqrt();
        let mut p = Self::zeros(shape);
        for v in &mut p.value {
            let z: f64 = StandardNormal.sample(rng);
            *v = F::of(z * std);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(F::zero());
    }

    pub fn cast<G: Real>(&self) -> Param<G> {
        Param {
            value: self
                .value
                .iter()
                .map(|v| G::of(v.to_f64().unwrap()))
                .collect(),
            grad: vec![G::zero(); self.len()],
            shape: self.shape.clone(),
        }
    }
}

/// Anything exposing an ordered list of parameters.
pub trait Parameterized<F: Real> {
    /// Parameters in a fixed, declared order.
    fn params(&self) -> Vec<&Param<F>>;
    fn params_mut(&mut self) -> Vec<&mut Param<F>>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// All parameter values concatenated in declared order.
    fn flat_values(&self) -> Vec<F> {
        self.params()
            .iter()
            .flat_map(|p| p.value.iter().copied())
            .collect()
    }

    /// Loads values from a flat buffer produced by [`Parameterized::flat_values`].
    fn load_flat(&mut self, flat: &[F]) -> Result<(), String> {
        let expected = self.num_params();
        if flat.len() != expected {
            return Err(format!("expected {expected} weights, found {}", flat.len()));
        }
        let mut offset = 0;
        for p in self.params_mut() {
            let n = p.len();
            p.value.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

/// Concatenates two NCHW tensors along the channel axis.
pub fn concat_channels<F: Real>(a: &Array4<F>, b: &Array4<F>) -> Array4<F> {
    ndarray::concatenate(Axis(1), &[a.view(), b.view()]).expect("matching N, H, W")
}

/// Splits a channel-concatenated gradient back into its two parts.
pub fn split_channels<F: Real>(g: &Array4<F>, first: usize) -> (Array4<F>, Array4<F>) {
    let (a, b) = g.view().split_at(Axis(1), first);
    (a.to_owned(), b.to_owned())
}
