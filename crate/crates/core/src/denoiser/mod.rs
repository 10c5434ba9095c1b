//! Conditional-GAN denoiser mapping short-exposure frames to their
//! long-exposure counterparts.

mod checkpoint;
mod config;
mod discriminator;
mod frames;
mod generator;
mod infer;
pub mod loss;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_KIND, CHECKPOINT_VERSION};
pub use config::{DiscriminatorConfig, GeneratorConfig, TrainConfig};
pub use discriminator::{discriminator_conv_param_count, Discriminator};
pub use frames::{check_frame, padded_dim, stack_padded, unstack_cropped, PairedFrames, MIN_FRAME};
pub use generator::{generator_param_count, Generator};
pub use infer::{denoise, denoise_frames, looks_unnormalized, DenoiseOutput};
pub use loss::{discriminator_loss, generator_loss, GeneratorLoss};
pub use train::{
    evaluate_generator, generator_objective, train, EpochStats, TrainReport, ValQuality,
};

use crate::nn::Real;
use crate::seed;

pub fn build_generator<F: Real>(
    config: &GeneratorConfig,
    rng_seed: u64,
) -> crate::Result<Generator<F>> {
    config.validate()?;
    Ok(Generator::new(*config, &mut seed::rng(rng_seed)))
}

pub fn build_discriminator<F: Real>(
    config: &DiscriminatorConfig,
    rng_seed: u64,
) -> crate::Result<Discriminator<F>> {
    config.validate()?;
    Ok(Discriminator::new(*config, &mut seed::rng(rng_seed)))
}
