//! Adversarial training loop.
//!
//! Per mini-batch: the generator proposes frames; every `d_update_period`
//! steps the critic takes one Adam step on real vs. generated frames with
//! smoothed labels; then the generator takes one Adam step on the
//! adversarial term plus `lambda_l1` times the mean absolute error (and the
//! optional SSIM / PSNR terms). The learning rate is cosine-annealed per
//! epoch and the weights with the best validation L1 are returned.

use std::time::Instant;

use ndarray::{concatenate, Array1, Array4, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::frames::{check_frame, stack_padded, unstack_cropped, PairedFrames};
use super::loss::{discriminator_loss, generator_loss, GeneratorLossGrad};
use super::{
    Checkpoint, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, TrainConfig,
};
use crate::metrics::{mean_l1, psnr, ssim, ssim_grad, SsimParams};
use crate::nn::{Adam, AdamConfig, Parameterized, Real};
use crate::seed;
use crate::simcam::{compute_norm_stats, Dataset, Split};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub gen_loss: f64,
    pub adversarial: f64,
    pub l1: f64,
    pub disc_loss: f64,
    pub val_l1: f64,
    pub val_psnr: f64,
    pub val_ssim: f64,
    pub lr: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Validation L1 of the untrained generator.
    pub initial_val_l1: f64,
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn best_val_l1(&self) -> f64 {
        self.epochs[self.best_epoch].val_l1
    }
}

/// Reconstruction quality on a frame set (normalised units, range 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValQuality {
    pub l1: f64,
    pub psnr: f64,
    pub ssim: f64,
}

pub fn evaluate_generator(
    generator: &Generator<f32>,
    frames: &PairedFrames,
    batch: usize,
) -> Result<ValQuality> {
    let out = super::denoise_frames(generator, &frames.inputs, frames.h, frames.w, batch)?;
    let params = SsimParams::with_range(1.0);
    let with_ssim = frames.h >= params.window && frames.w >= params.window;
    let (mut l1, mut p, mut s) = (0.0, 0.0, 0.0);
    for (o, t) in out.iter().zip(&frames.targets) {
        l1 += mean_l1(o, t)?;
        p += psnr(o, t, 1.0)?.min(100.0);
        if with_ssim {
            s += ssim(o, t, frames.h, frames.w, &params)?;
        }
    }
    let n = out.len().max(1) as f64;
    Ok(ValQuality {
        l1: l1 / n,
        psnr: p / n,
        ssim: s / n,
    })
}

fn to_f64(a: &Array1<f32>) -> Vec<f64> {
    a.iter().map(|&v| v as f64).collect()
}

/// Trains on the dataset's train split and early-stops on its val split.
pub fn train(
    dataset: &Dataset,
    gen_config: &GeneratorConfig,
    disc_config: &DiscriminatorConfig,
    config: &TrainConfig,
) -> Result<(Checkpoint, TrainReport)> {
    gen_config.validate()?;
    disc_config.validate()?;
    config.validate()?;
    let norm = match dataset.norm {
        Some(n) => n,
        None => compute_norm_stats(dataset, Split::Train)?,
    };
    let durations = config.durations_ms.as_deref();
    let train_set = PairedFrames::from_dataset(dataset, Split::Train, &norm, durations);
    let val_set = PairedFrames::from_dataset(dataset, Split::Val, &norm, durations);
    if train_set.is_empty() {
        return Err(Error::EmptySplit("train".into()));
    }
    if val_set.is_empty() {
        return Err(Error::EmptySplit("val".into()));
    }
    let (h, w) = (train_set.h, train_set.w);
    check_frame(h, w)?;

    let mut generator =
        Generator::<f32>::new(*gen_config, &mut seed::rng(seed::derive(config.seed, 1)));
    let mut critic =
        Discriminator::<f32>::new(*disc_config, &mut seed::rng(seed::derive(config.seed, 2)));
    let adam_cfg = AdamConfig {
        beta1: config.beta1,
        beta2: config.beta2,
        eps: 1e-8,
    };
    let mut adam_g = Adam::new(adam_cfg);
    let mut adam_d = Adam::new(adam_cfg);
    let ssim_params = SsimParams::with_range(1.0);

    let initial_val_l1 = evaluate_generator(&generator, &val_set, 64)?.l1;
    let mut best = (
        f64::INFINITY,
        0usize,
        generator.flat_values(),
        critic.flat_values(),
    );
    let mut epochs = Vec::new();
    let mut since_best = 0usize;
    let mut stopped_early = false;
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let start = Instant::now();
        let lr = config.lr_at(epoch);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut seed::rng(seed::derive2(config.seed, 3, epoch as u64)));
        let (mut g_sum, mut adv_sum, mut l1_sum, mut d_sum) = (0.0, 0.0, 0.0, 0.0);
        let (mut g_steps, mut d_steps) = (0usize, 0usize);

        for batch in order.chunks(config.batch_size) {
            let mut rng = seed::rng(seed::derive2(config.seed, 4, step as u64));
            let inputs: Vec<&[f32]> = batch
                .iter()
                .map(|&i| train_set.inputs[i].as_slice())
                .collect();
            let targets: Vec<&[f32]> = batch
                .iter()
                .map(|&i| train_set.targets[i].as_slice())
                .collect();
            let x = stack_padded::<f32>(&inputs, h, w);
            let y = stack_padded::<f32>(&targets, h, w);
            let nb = batch.len();

            let fake = generator.forward(&x);

            if step.is_multiple_of(config.d_update_period) {
                critic.zero_grad();
                let both = concatenate(Axis(0), &[y.view(), fake.view()]).unwrap();
                let logits = to_f64(&critic.forward(&both, &mut rng));
                let (d_loss, g_real, g_fake) = discriminator_loss(
                    &logits[..nb],
                    &logits[nb..],
                    config.label_real,
                    config.label_fake,
                );
                if !d_loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, step });
                }
                let grad: Array1<f32> = g_real.iter().chain(&g_fake).map(|&v| v as f32).collect();
                critic.backward(&grad);
                adam_d.step(critic.params_mut(), lr);
                d_sum += d_loss;
                d_steps += 1;
            }

            generator.zero_grad();
            let (lg, mut g_fake) = adversarial_grad(
                &mut critic,
                &fake,
                &targets,
                h,
                w,
                config.lambda_l1,
                config.label_real,
                &mut rng,
            )?;
            if !lg.loss.total.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            let fake_frames = unstack_cropped(&fake, h, w);
            let fake_flat: Vec<f32> = fake_frames.concat();
            let target_flat: Vec<f32> = targets.concat();

            let (ph, pw) = (g_fake.shape()[2], g_fake.shape()[3]);
            let mut aux = vec![0.0f64; nb * h * w];
            if config.lambda_ssim > 0.0 && h >= ssim_params.window && w >= ssim_params.window {
                for (b, (f, t)) in fake_frames.iter().zip(&targets).enumerate() {
                    let (_, gs) = ssim_grad(f, t, h, w, &ssim_params)?;
                    for (a, g) in aux[b * h * w..(b + 1) * h * w].iter_mut().zip(gs) {
                        *a -= config.lambda_ssim * g / nb as f64;
                    }
                }
            }
            if config.lambda_psnr > 0.0 {
                // d(-PSNR)/df = (10 / ln 10) * 2 (f - t) / (n * mse)
                let n = fake_flat.len() as f64;
                let mse = (fake_flat
                    .iter()
                    .zip(&target_flat)
                    .map(|(f, t)| ((f - t) as f64).powi(2))
                    .sum::<f64>()
                    / n)
                    .max(1e-10);
                let k = config.lambda_psnr * 10.0 / std::f64::consts::LN_10 * 2.0 / (n * mse);
                for (a, (f, t)) in aux.iter_mut().zip(fake_flat.iter().zip(&target_flat)) {
                    *a += k * (f - t) as f64;
                }
            }
            for b in 0..nb {
                for yy in 0..h {
                    for xx in 0..w {
                        g_fake[[b, 0, yy, xx]] += aux[(b * h + yy) * w + xx] as f32;
                    }
                }
            }
            if (ph, pw) != (h, w) {
                // padded border pixels carry no reconstruction target
                for b in 0..nb {
                    for yy in 0..ph {
                        for xx in 0..pw {
                            if yy >= h || xx >= w {
                                g_fake[[b, 0, yy, xx]] = 0.0;
                            }
                        }
                    }
                }
            }
            generator.backward(&g_fake);
            adam_g.step(generator.params_mut(), lr);
            g_sum += lg.loss.total;
            adv_sum += lg.loss.adversarial;
            l1_sum += lg.loss.l1;
            g_steps += 1;
            step += 1;
        }

        let val = evaluate_generator(&generator, &val_set, 64)?;
        let gs = g_steps.max(1) as f64;
        epochs.push(EpochStats {
            epoch,
            gen_loss: g_sum / gs,
            adversarial: adv_sum / gs,
            l1: l1_sum / gs,
            disc_loss: d_sum / d_steps.max(1) as f64,
            val_l1: val.l1,
            val_psnr: val.psnr,
            val_ssim: val.ssim,
            lr,
            wall_s: start.elapsed().as_secs_f64(),
        });
        if val.l1 < best.0 {
            best = (val.l1, epoch, generator.flat_values(), critic.flat_values());
            since_best = 0;
        } else {
            since_best += 1;
            if config.early_stop_patience > 0 && since_best >= config.early_stop_patience {
                stopped_early = epoch + 1 < config.epochs;
                break;
            }
        }
    }

    let (best_l1, best_epoch, g_best, d_best) = best;
    generator.load_flat(&g_best).expect("same architecture");
    critic.load_flat(&d_best).expect("same architecture");
    let ckpt = Checkpoint {
        generator,
        discriminator: critic,
        train_config: config.clone(),
        norm: Some(norm),
        epoch: best_epoch,
        best_val_l1: best_l1,
    };
    Ok((
        ckpt,
        TrainReport {
            initial_val_l1,
            epochs,
            best_epoch,
            stopped_early,
        },
    ))
}

/// Generator loss for a generated batch and its gradient with respect to
/// the (padded) generated frames. Critic gradients are cleared afterwards.
#[allow(clippy::too_many_arguments)]
pub fn adversarial_grad<F: Real, R: rand::Rng + ?Sized>(
    critic: &mut Discriminator<F>,
    fake: &Array4<F>,
    targets: &[&[f32]],
    h: usize,
    w: usize,
    lambda_l1: f64,
    label_real: f64,
    rng: &mut R,
) -> Result<(GeneratorLossGrad, Array4<F>)> {
    let logits: Vec<f64> = critic
        .forward(fake, rng)
        .iter()
        .map(|v| v.to_f64().unwrap())
        .collect();
    let fake_flat: Vec<f32> = unstack_cropped(fake, h, w).concat();
    let target_flat: Vec<f32> = targets.concat();
    let lg = generator_loss(&logits, &fake_flat, &target_flat, lambda_l1, label_real)?;
    let g_logits: Array1<F> = lg.d_logits.iter().map(|&v| F::of(v)).collect();
    let mut g_fake = critic.backward(&g_logits);
    critic.zero_grad();
    for b in 0..targets.len() {
        for yy in 0..h {
            for xx in 0..w {
                let v = &mut g_fake[[b, 0, yy, xx]];
                *v = *v + F::of(lg.d_fake[(b * h + yy) * w + xx]);
            }
        }
    }
    Ok((lg, g_fake))
}

/// Total generator objective on one batch, evaluated without
/// touching gradients; used by gradient checks.
pub fn generator_objective<F: Real>(
    generator: &Generator<F>,
    critic: &Discriminator<F>,
    x: &Array4<F>,
    y: &Array4<F>,
    lambda_l1: f64,
    label_real: f64,
) -> f64 {
    let fake = generator.infer(x);
    let logits: Vec<f64> = critic
        .infer(&fake)
        .iter()
        .map(|v| v.to_f64().unwrap())
        .collect();
    let nb = logits.len() as f64;
    let adv = logits
        .iter()
        .map(|&l| super::loss::bce_with_logits(l, label_real))
        .sum::<f64>()
        / nb;
    let n = fake.len() as f64;
    let l1 = fake
        .iter()
        .zip(y.iter())
        .map(|(a, b)| (a.to_f64().unwrap() - b.to_f64().unwrap()).abs())
        .sum::<f64>()
        / n;
    adv + lambda_l1 * l1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcam::{generate_dataset, GenerateConfig, LatticeGeometry, OpticsConfig};
    use ndarray::Array4;
    use rand::Rng;

    #[test]
    fn full_objective_gradient_matches_finite_difference() {
        let gcfg = GeneratorConfig {
            width_mult: 0.05,
            residual_blocks: 1,
        };
        let dcfg = DiscriminatorConfig {
            width_mult: 0.05,
            dropout_rate: 0.0,
            leaky_slope: 0.2,
        };
        let mut generator = Generator::<f64>::new(gcfg, &mut seed::rng(1));
        let mut critic = Discriminator::<f64>::new(dcfg, &mut seed::rng(2));
        let mut rng = seed::rng(3);
        let (h, w) = (12, 12);
        let x = Array4::<f64>::from_shape_fn((2, 1, h, w), |_| rng.random::<f64>() - 0.5);
        let y = Array4::<f64>::from_shape_fn((2, 1, h, w), |_| rng.random::<f64>() - 0.5);
        let targets: Vec<Vec<f32>> = unstack_cropped(&y, h, w);
        let target_refs: Vec<&[f32]> = targets.iter().map(|t| t.as_slice()).collect();
        // targets are f32 in the training path; make the oracle see the same values
        let y = stack_padded::<f64>(&target_refs, h, w);
        let (lambda, label) = (5.0, 0.9);

        generator.zero_grad();
        let fake = generator.forward(&x);
        let (_, g_fake) = adversarial_grad(
            &mut critic,
            &fake,
            &target_refs,
            h,
            w,
            lambda,
            label,
            &mut rng,
        )
        .unwrap();
        generator.backward(&g_fake);
        let analytic: Vec<f64> = generator
            .params()
            .iter()
            .flat_map(|p| p.grad.iter().copied())
            .collect();

        let base = generator.flat_values();
        let mut pick = seed::rng(4);
        let eps = 1e-6;
        for _ in 0..10 {
            let i = pick.random_range(0..base.len());
            let mut v = base.clone();
            v[i] += eps;
            generator.load_flat(&v).unwrap();
            let up = generator_objective(&generator, &critic, &x, &y, lambda, label);
            v[i] -= 2.0 * eps;
            generator.load_flat(&v).unwrap();
            let down = generator_objective(&generator, &critic, &x, &y, lambda, label);
            generator.load_flat(&base).unwrap();
            let numeric = (up - down) / (2.0 * eps);
            let scale = numeric.abs().max(analytic[i].abs()).max(1e-4);
            assert!(
                (numeric - analytic[i]).abs() / scale < 1e-3,
                "param {i}: numeric {numeric} analytic {}",
                analytic[i]
            );
        }
    }

    fn tiny_dataset() -> Dataset {
        let cfg = GenerateConfig {
            durations_ms: vec![10.0],
            shots_per_duration: 40,
            p_bright: 0.5,
            base_seed: 9,
        };
        generate_dataset(
            &LatticeGeometry::desk_5um(),
            &OpticsConfig::desk_5um(),
            &cfg,
        )
        .unwrap()
    }

    fn tiny_train_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 8,
            lr: 1e-3,
            early_stop_patience: 0,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn short_run_lowers_validation_l1_and_is_reproducible() {
        let ds = tiny_dataset();
        let g = GeneratorConfig::with_width(0.125);
        let d = DiscriminatorConfig::with_width(0.125);
        let (ckpt, report) = train(&ds, &g, &d, &tiny_train_config(3)).unwrap();
        assert_eq!(report.epochs.len(), 3);
        assert!(report.best_val_l1() < report.initial_val_l1, "{report:?}");
        assert!((ckpt.best_val_l1 - report.best_val_l1()).abs() < 1e-12);
        let (again, _) = train(&ds, &g, &d, &tiny_train_config(3)).unwrap();
        assert_eq!(ckpt.generator.flat_values(), again.generator.flat_values());
    }

    #[test]
    fn empty_validation_split_is_rejected() {
        let mut ds = tiny_dataset();
        ds.splits.val.clear();
        let err = train(
            &ds,
            &GeneratorConfig::with_width(0.05),
            &DiscriminatorConfig::with_width(0.05),
            &tiny_train_config(1),
        );
        assert!(matches!(err, Err(Error::EmptySplit(_))));
    }
}
