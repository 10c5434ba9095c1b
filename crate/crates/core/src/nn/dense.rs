use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;

use super::{Param, Parameterized, Real};

/// Fully connected layer on (batch, features) inputs.
#[derive(Debug, Clone)]
pub struct Dense<F: Real> {
    pub inputs: usize,
    pub outputs: usize,
    /// (outputs, inputs)
    pub weight: Param<F>,
    pub bias: Param<F>,
    cache: Option<Array2<F>>,
}

impl<F: Real> Dense<F> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            inputs,
            outputs,
            weight: Param::he_normal(&[outputs, inputs], inputs, rng),
            bias: Param::zeros(&[outputs]),
            cache: None,
        }
    }

    fn w(&self) -> ArrayView2<'_, F> {
        ArrayView2::from_shape((self.outputs, self.inputs), &self.weight.value).unwrap()
    }

    pub fn infer(&self, x: &Array2<F>) -> Array2<F> {
        let mut y = Array2::<F>::zeros((x.nrows(), self.outputs));
        general_mat_mul(F::one(), x, &self.w().t(), F::zero(), &mut y);
        for mut row in y.axis_iter_mut(Axis(0)) {
            for (v, &b) in row.iter_mut().zip(&self.bias.value) {
                *v = *v + b;
            }
        }
        y
    }

    pub fn forward(&mut self, x: &Array2<F>) -> Array2<F> {
        let y = self.infer(x);
        self.cache = Some(x.clone());
        y
    }

    pub fn backward(&mut self, grad: &Array2<F>) -> Array2<F> {
        let x = self.cache.take().expect("dense backward without forward");
        {
            let mut dw =
                ArrayViewMut2::from_shape((self.outputs, self.inputs), &mut self.weight.grad)
                    .unwrap();
            general_mat_mul(F::one(), &grad.t(), &x, F::one(), &mut dw);
        }
        for (gb, col) in self.bias.grad.iter_mut().zip(grad.axis_iter(Axis(1))) {
            *gb = *gb + col.sum();
        }
        let mut dx = Array2::<F>::zeros((grad.nrows(), self.inputs));
        general_mat_mul(F::one(), grad, &self.w(), F::zero(), &mut dx);
        dx
    }
}

impl<F: Real> Parameterized<F> for Dense<F> {
    fn params(&self) -> Vec<&Param<F>> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
