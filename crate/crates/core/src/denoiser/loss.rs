//! Adversarial and reconstruction objectives.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Binary cross-entropy of a logit against a (possibly smoothed) target.
pub fn bce_with_logits(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

/// d BCE / d logit.
pub fn bce_grad(logit: f64, target: f64) -> f64 {
    sigmoid(logit) - target
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of the sigmoid.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorLoss {
    pub total: f64,
    pub adversarial: f64,
    /// `lambda_l1 * mean |fake - target|`
    pub l1: f64,
}

/// Non-saturating adversarial term plus weighted mean absolute error, with
/// gradients for the critic logits and the generated pixels.
#[derive(Debug, Clone)]
pub struct GeneratorLossGrad {
    pub loss: GeneratorLoss,
    pub d_logits: Vec<f64>,
    pub d_fake: Vec<f64>,
}

pub fn generator_loss(
    d_logits_fake: &[f64],
    fake: &[f32],
    target: &[f32],
    lambda_l1: f64,
    label_real: f64,
) -> Result<GeneratorLossGrad> {
    if fake.len() != target.len() || fake.is_empty() {
        return Err(Error::Shape(format!(
            "fake {} vs target {} pixels",
            fake.len(),
            target.len()
        )));
    }
    let nb = d_logits_fake.len().max(1) as f64;
    let adversarial = d_logits_fake
        .iter()
        .map(|&l| bce_with_logits(l, label_real))
        .sum::<f64>()
        / nb;
    let d_logits = d_logits_fake
        .iter()
        .map(|&l| bce_grad(l, label_real) / nb)
        .collect();
    let n = fake.len() as f64;
    let mut abs_sum = 0.0;
    let d_fake = fake
        .iter()
        .zip(target)
        .map(|(&f, &t)| {
            let d = f as f64 - t as f64;
            abs_sum += d.abs();
            lambda_l1 * d.signum() * f64::from(d != 0.0) / n
        })
        .collect();
    let l1 = lambda_l1 * abs_sum / n;
    Ok(GeneratorLossGrad {
        loss: GeneratorLoss {
            total: adversarial + l1,
            adversarial,
            l1,
        },
        d_logits,
        d_fake,
    })
}

/// Mean of the smoothed-label cross-entropies on real and generated frames,
/// with gradients for both logit vectors.
pub fn discriminator_loss(
    d_logits_real: &[f64],
    d_logits_fake: &[f64],
    label_real: f64,
    label_fake: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let nr = d_logits_real.len().max(1) as f64;
    let nf = d_logits_fake.len().max(1) as f64;
    let real = d_logits_real
        .iter()
        .map(|&l| bce_with_logits(l, label_real))
        .sum::<f64>()
        / nr;
    let fake = d_logits_fake
        .iter()
        .map(|&l| bce_with_logits(l, label_fake))
        .sum::<f64>()
        / nf;
    let g_real = d_logits_real
        .iter()
        .map(|&l| 0.5 * bce_grad(l, label_real) / nr)
        .collect();
    let g_fake = d_logits_fake
        .iter()
        .map(|&l| 0.5 * bce_grad(l, label_fake) / nf)
        .collect();
    (0.5 * (real + fake), g_real, g_fake)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entropy(p: f64) -> f64 {
        -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
    }

    #[test]
    fn l1_term_cases() {
        let x = vec![0.2f32; 10];
        let g = generator_loss(&[0.3], &x, &x, 200.0, 0.9).unwrap();
        assert_eq!(g.loss.l1, 0.0);
        let y: Vec<f32> = x.iter().map(|v| v + 0.01).collect();
        let g = generator_loss(&[0.3], &y, &x, 200.0, 0.9).unwrap();
        assert!((g.loss.l1 - 2.0).abs() < 1e-4);
        let g0 = generator_loss(&[0.3], &y, &x, 0.0, 0.9).unwrap();
        assert_eq!(g0.loss.total, g0.loss.adversarial);
        assert!(generator_loss(&[0.3], &y[..3], &x, 1.0, 0.9).is_err());
    }

    #[test]
    fn smoothed_minimum() {
        let (l, gr, gf) = discriminator_loss(&[logit(0.9)], &[logit(0.1)], 0.9, 0.1);
        assert!((l - 0.5 * (entropy(0.9) + entropy(0.1))).abs() < 1e-12);
        assert!(gr[0].abs() < 1e-12 && gf[0].abs() < 1e-12);
    }

    #[test]
    fn unsmoothed_perfect_discrimination_vanishes() {
        let (l, _, _) = discriminator_loss(&[40.0], &[-40.0], 1.0, 0.0);
        assert!(l < 1e-15);
    }

    #[test]
    fn swapping_logits_increases_loss() {
        let (a, _, _) = discriminator_loss(&[1.7, 0.4], &[-1.1, -0.2], 0.9, 0.1);
        let (b, _, _) = discriminator_loss(&[-1.1, -0.2], &[1.7, 0.4], 0.9, 0.1);
        assert!(b > a);
    }

    #[test]
    fn bce_gradient_matches_difference() {
        for &(l, t) in &[(0.3, 0.9), (-2.0, 0.1), (5.0, 0.9)] {
            let fd = (bce_with_logits(l + 1e-6, t) - bce_with_logits(l - 1e-6, t)) / 2e-6;
            assert!((fd - bce_grad(l, t)).abs() < 1e-8);
        }
    }
}
