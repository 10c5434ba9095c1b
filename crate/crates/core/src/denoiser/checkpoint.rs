use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, TrainConfig};
use crate::container::Container;
use crate::nn::Parameterized;
use crate::seed;
use crate::simcam::DatasetNorm;
use crate::{Error, Result};

pub const CHECKPOINT_KIND: &str = "denoiser-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    generator: GeneratorConfig,
    discriminator: DiscriminatorConfig,
    train: TrainConfig,
    norm: Option<DatasetNorm>,
    epoch: usize,
    best_val_l1: f64,
}

/// Trained generator and critic with everything needed to reuse them.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub generator: Generator<f32>,
    pub discriminator: Discriminator<f32>,
    pub train_config: TrainConfig,
    pub norm: Option<DatasetNorm>,
    /// Epoch (0-based) whose weights are stored.
    pub epoch: usize,
    pub best_val_l1: f64,
}

impl Checkpoint {
    pub fn to_container(&self) -> Container {
        let manifest = Manifest {
            format_version: CHECKPOINT_VERSION,
            generator: self.generator.config,
            discriminator: self.discriminator.config,
            train: self.train_config.clone(),
            norm: self.norm,
            epoch: self.epoch,
            best_val_l1: self.best_val_l1,
        };
        Container {
            kind: CHECKPOINT_KIND.into(),
            body: serde_json::to_value(manifest).expect("serialisable"),
            blobs: vec![
                ("generator".into(), self.generator.flat_values()),
                ("discriminator".into(), self.discriminator.flat_values()),
            ],
        }
    }

    pub fn from_container(c: &Container, path: &Path) -> Result<Self> {
        if c.kind != CHECKPOINT_KIND {
            return Err(Error::corrupt(
                path,
                format!("expected {CHECKPOINT_KIND}, found {}", c.kind),
            ));
        }
        let m: Manifest = serde_json::from_value(c.body.clone())
            .map_err(|e| Error::corrupt(path, e.to_string()))?;
        if m.format_version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: m.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let mut generator = Generator::new(m.generator, &mut seed::rng(0));
        let mut discriminator = Discriminator::new(m.discriminator, &mut seed::rng(0));
        let blob = |name: &str| {
            c.blob(name)
                .ok_or_else(|| Error::corrupt(path, format!("missing blob {name}")))
        };
        generator
            .load_flat(blob("generator")?)
            .map_err(|e| Error::corrupt(path, e))?;
        discriminator
            .load_flat(blob("discriminator")?)
            .map_err(|e| Error::corrupt(path, e))?;
        Ok(Self {
            generator,
            discriminator,
            train_config: m.train,
            norm: m.norm,
            epoch: m.epoch,
            best_val_l1: m.best_val_l1,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::load(path)?, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::denoise_frames;
    use crate::simcam::NormStats;

    fn sample() -> Checkpoint {
        let g = GeneratorConfig::with_width(0.05);
        let d = DiscriminatorConfig::with_width(0.05);
        let stats = NormStats {
            mu: 1.0,
            i_min: -2.0,
            i_max: 30.0,
        };
        Checkpoint {
            generator: Generator::new(g, &mut seed::rng(1)),
            discriminator: Discriminator::new(d, &mut seed::rng(2)),
            train_config: TrainConfig::default(),
            norm: Some(DatasetNorm {
                short: stats,
                long: stats,
            }),
            epoch: 4,
            best_val_l1: 0.125,
        }
    }

    #[test]
    fn save_load_round_trip_reproduces_outputs() {
        let ckpt = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ardc");
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.epoch, 4);
        assert_eq!(back.norm, ckpt.norm);
        assert_eq!(back.generator.flat_values(), ckpt.generator.flat_values());
        let frame: Vec<f32> = (0..144).map(|i| ((i * 7) % 13) as f32 / 13.0).collect();
        let a = denoise_frames(&ckpt.generator, std::slice::from_ref(&frame), 12, 12, 1).unwrap();
        let b = denoise_frames(&back.generator, &[frame], 12, 12, 1).unwrap();
        for (x, y) in a[0].iter().zip(&b[0]) {
            assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ardc");
        sample().save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            Checkpoint::load(&path),
            Err(Error::Corrupt { .. })
        ));
        assert!(matches!(
            Checkpoint::load(&dir.path().join("none")),
            Err(Error::Missing(_))
        ));
    }
}
