use serde::{Deserialize, Serialize};

use super::{Param, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers follow the parameter order
/// handed to [`Adam::step`], which must be stable across calls.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step<F: Real>(&mut self, params: Vec<&mut Param<F>>, lr: f64) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        assert_eq!(
            self.m.len(),
            params.len(),
            "parameter list changed between steps"
        );
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let step_size = lr / bc1;
        for ((p, m), v) in params.into_iter().zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                let g = p.grad[i].to_f64().unwrap();
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let update = step_size * m[i] / ((v[i] / bc2).sqrt() + eps);
                p.value[i] = p.value[i] - F::of(update);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut p = Param::<f64>::zeros(&[2]);
        p.grad = vec![3.0, -0.5];
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(vec![&mut p], 0.01);
        assert!((p.value[0] + 0.01).abs() < 1e-8);
        assert!((p.value[1] - 0.01).abs() < 1e-8);
    }

    #[test]
    fn minimises_quadratic() {
        let mut p = Param::<f64>::filled(&[1], 5.0);
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..2000 {
            p.grad[0] = 2.0 * (p.value[0] - 1.5);
            adam.step(vec![&mut p], 0.05);
        }
        assert!((p.value[0] - 1.5).abs() < 1e-3);
    }
}
