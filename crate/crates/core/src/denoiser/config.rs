use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Encoder / residual / decoder generator, channel widths scaled by `width_mult`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub width_mult: f64,
    pub residual_blocks: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            width_mult: 1.0,
            residual_blocks: 3,
        }
    }
}

pub(crate) fn scaled(base: usize, width_mult: f64) -> usize {
    ((base as f64 * width_mult).round() as usize).max(1)
}

impl GeneratorConfig {
    pub fn with_width(width_mult: f64) -> Self {
        Self {
            width_mult,
            ..Self::default()
        }
    }

    /// Channels after Enc1, Enc2, Enc3.
    pub fn channels(&self) -> [usize; 3] {
        [
            scaled(64, self.width_mult),
            scaled(128, self.width_mult),
            scaled(256, self.width_mult),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width_mult > 0.0 && self.width_mult.is_finite()) {
            return Err(Error::config("generator.width_mult", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub width_mult: f64,
    /// Applied after Conv2 to Conv4 while training.
    pub dropout_rate: f64,
    pub leaky_slope: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            width_mult: 1.0,
            dropout_rate: 0.3,
            leaky_slope: 0.2,
        }
    }
}

impl DiscriminatorConfig {
    pub fn with_width(width_mult: f64) -> Self {
        Self {
            width_mult,
            ..Self::default()
        }
    }

    pub fn channels(&self) -> [usize; 4] {
        [
            scaled(64, self.width_mult),
            scaled(128, self.width_mult),
            scaled(256, self.width_mult),
            scaled(512, self.width_mult),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width_mult > 0.0 && self.width_mult.is_finite()) {
            return Err(Error::config("discriminator.width_mult", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(
                "discriminator.dropout_rate",
                "must lie in [0, 1)",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda_l1: f64,
    pub label_real: f64,
    pub label_fake: f64,
    /// Generator steps per discriminator step.
    pub d_update_period: usize,
    /// Cosine annealing of the learning rate to zero over `epochs`.
    pub cosine_schedule: bool,
    /// Epochs without validation-L1 improvement before stopping; 0 disables.
    pub early_stop_patience: usize,
    /// Weight of the `1 - SSIM` term; 0 disables.
    pub lambda_ssim: f64,
    /// Weight of the `-PSNR / 100` term; 0 disables.
    pub lambda_psnr: f64,
    /// Restricts training pairs to these long-path durations.
    pub durations_ms: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            batch_size: 16,
            epochs: 30,
            lambda_l1: 200.0,
            label_real: 0.9,
            label_fake: 0.1,
            d_update_period: 2,
            cosine_schedule: true,
            early_stop_patience: 5,
            lambda_ssim: 0.0,
            lambda_psnr: 0.0,
            durations_ms: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("train.lr", self.lr),
            ("train.beta1", self.beta1),
            ("train.beta2", self.beta2),
            ("train.lambda_l1", self.lambda_l1),
            ("train.label_real", self.label_real),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be > 0"));
            }
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(Error::config("train.beta1/beta2", "must be < 1"));
        }
        if !(self.label_fake >= 0.0 && self.label_fake < self.label_real && self.label_real <= 1.0)
        {
            return Err(Error::config(
                "train.label_fake",
                "need 0 <= label_fake < label_real <= 1",
            ));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.d_update_period == 0 {
            return Err(Error::config(
                "train.batch_size/epochs/d_update_period",
                "must be >= 1",
            ));
        }
        if self.lambda_ssim < 0.0 || self.lambda_psnr < 0.0 {
            return Err(Error::config(
                "train.lambda_ssim/lambda_psnr",
                "must be >= 0",
            ));
        }
        Ok(())
    }

    /// Learning rate used during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if !self.cosine_schedule {
            return self.lr;
        }
        self.lr * (1.0 + (std::f64::consts::PI * epoch as f64 / self.epochs as f64).cos()) / 2.0
    }
}
