//! Throughput and latency measurements for denoiser inference.

use std::time::Instant;

use ndarray::Array4;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::denoiser::{denoise_frames, stack_padded, Generator};
use crate::metrics::image_quality;
use crate::simcam::{Dataset, NormStats};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentInfo {
    pub cpu_model: String,
    pub logical_cores: usize,
    pub os: String,
    pub arch: String,
    pub accelerator: Option<String>,
    pub tool_version: String,
}

pub fn environment() -> EnvironmentInfo {
    let cpu_model = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| "unknown".into());
    EnvironmentInfo {
        cpu_model,
        logical_cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
        os: std::env::consts::OS.into(),
        arch: std::env::consts::ARCH.into(),
        accelerator: None,
        tool_version: env!("CARGO_PKG_VERSION").into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub iters: usize,
    pub warmup: usize,
    /// Batches whose input tensor would exceed this many pixels are skipped.
    pub max_batch_pixels: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            iters: 20,
            warmup: 2,
            max_batch_pixels: 1 << 24,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::config("bench.iters", "must be >= 1"));
        }
        if self.warmup == 0 {
            return Err(Error::config("bench.warmup", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub mode: String,
    pub frame_h: usize,
    pub frame_w: usize,
    pub batch_size: usize,
    pub instances: usize,
    pub iters: usize,
    pub warmup: usize,
    /// Aggregate images per second.
    pub throughput: f64,
    pub per_instance_throughput: Vec<f64>,
    /// Seconds per image within one instance.
    pub latency_mean_s: f64,
    pub latency_p50_s: f64,
    pub latency_p99_s: f64,
    pub skipped: Option<String>,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    sorted[((q * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1)]
}

fn random_batch(n: usize, h: usize, w: usize, rng_seed: u64) -> Array4<f32> {
    let mut rng = seed::rng(rng_seed);
    let frames: Vec<Vec<f32>> = (0..n)
        .map(|_| (0..h * w).map(|_| rng.random::<f32>() * 0.1).collect())
        .collect();
    let refs: Vec<&[f32]> = frames.iter().map(|f| f.as_slice()).collect();
    stack_padded(&refs, h, w)
}

/// Per-image latencies of `iters` timed batch calls after `warmup` calls.
fn time_calls(
    generator: &Generator<f32>,
    x: &Array4<f32>,
    iters: usize,
    warmup: usize,
) -> (Vec<f64>, f64) {
    for _ in 0..warmup {
        std::hint::black_box(generator.infer(x));
    }
    let n = x.shape()[0] as f64;
    let start = Instant::now();
    let lat = (0..iters)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(generator.infer(x));
            t.elapsed().as_secs_f64() / n
        })
        .collect();
    (lat, start.elapsed().as_secs_f64())
}

fn skipped(
    mode: &str,
    h: usize,
    w: usize,
    batch: usize,
    instances: usize,
    cfg: &BenchConfig,
    why: String,
) -> BenchResult {
    BenchResult {
        mode: mode.into(),
        frame_h: h,
        frame_w: w,
        batch_size: batch,
        instances,
        iters: 0,
        warmup: cfg.warmup,
        throughput: 0.0,
        per_instance_throughput: Vec::new(),
        latency_mean_s: 0.0,
        latency_p50_s: 0.0,
        latency_p99_s: 0.0,
        skipped: Some(why),
    }
}

#[allow(clippy::too_many_arguments)]
fn summarise(
    mode: &str,
    h: usize,
    w: usize,
    batch: usize,
    cfg: &BenchConfig,
    mut lat: Vec<f64>,
    per_instance: Vec<f64>,
    throughput: f64,
) -> BenchResult {
    lat.sort_by(f64::total_cmp);
    BenchResult {
        mode: mode.into(),
        frame_h: h,
        frame_w: w,
        batch_size: batch,
        instances: per_instance.len(),
        iters: cfg.iters,
        warmup: cfg.warmup,
        throughput,
        per_instance_throughput: per_instance,
        latency_mean_s: lat.iter().sum::<f64>() / lat.len() as f64,
        latency_p50_s: percentile(&lat, 0.5),
        latency_p99_s: percentile(&lat, 0.99),
        skipped: None,
    }
}

pub fn bench_batch(
    generator: &Generator<f32>,
    h: usize,
    w: usize,
    batch_sizes: &[usize],
    cfg: &BenchConfig,
) -> Result<Vec<BenchResult>> {
    cfg.validate()?;
    crate::denoiser::check_frame(h, w)?;
    Ok(batch_sizes
        .iter()
        .map(|&b| {
            if b == 0 || b * h * w > cfg.max_batch_pixels {
                return skipped(
                    "batch",
                    h,
                    w,
                    b,
                    1,
                    cfg,
                    format!("batch of {b} exceeds the memory cap"),
                );
            }
            let x = random_batch(b, h, w, cfg.seed);
            let (lat, wall) = time_calls(generator, &x, cfg.iters, cfg.warmup);
            let tp = (b * cfg.iters) as f64 / wall;
            summarise("batch", h, w, b, cfg, lat, vec![tp], tp)
        })
        .collect())
}

/// Independent model copies on their own threads; no shared mutable state.
pub fn bench_parallel(
    generator: &Generator<f32>,
    h: usize,
    w: usize,
    batch: usize,
    instances: &[usize],
    cfg: &BenchConfig,
) -> Result<Vec<BenchResult>> {
    cfg.validate()?;
    crate::denoiser::check_frame(h, w)?;
    Ok(instances
        .iter()
        .map(|&n| {
            if n == 0 || n * batch * h * w > cfg.max_batch_pixels {
                return skipped(
                    "parallel",
                    h,
                    w,
                    batch,
                    n,
                    cfg,
                    format!("{n} instances exceed the memory cap"),
                );
            }
            let runs: Vec<(Vec<f64>, f64)> = std::thread::scope(|s| {
                let handles: Vec<_> = (0..n)
                    .map(|i| {
                        let g = generator.clone();
                        let x = random_batch(batch, h, w, seed::derive(cfg.seed, i as u64));
                        s.spawn(move || time_calls(&g, &x, cfg.iters, cfg.warmup))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("bench thread"))
                    .collect()
            });
            let per: Vec<f64> = runs
                .iter()
                .map(|(_, wall)| (batch * cfg.iters) as f64 / wall)
                .collect();
            let agg = per.iter().sum();
            let lat = runs.into_iter().flat_map(|(l, _)| l).collect();
            summarise("parallel", h, w, batch, cfg, lat, per, agg)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub rows: usize,
    pub cols: usize,
    pub frame_h: usize,
    pub frame_w: usize,
    pub frames: usize,
    pub psnr_db: f64,
    pub ssim: f64,
    pub mean_l1: f64,
    /// Seconds per frame.
    pub latency_s: f64,
    pub latency_per_site_s: f64,
}

/// Denoises each stitched dataset (all its shots) and scores the output
/// against the normalised long frames.
pub fn bench_scaling(
    generator: &Generator<f32>,
    short: &NormStats,
    long: &NormStats,
    grids: &[Dataset],
    cfg: &BenchConfig,
) -> Result<Vec<ScalingRow>> {
    cfg.validate()?;
    grids
        .iter()
        .map(|ds| {
            let g = &ds.geometry;
            let inputs: Vec<Vec<f32>> = ds
                .shots
                .iter()
                .map(|s| short.normalize(&s.short_image))
                .collect();
            let targets: Vec<Vec<f32>> = ds
                .shots
                .iter()
                .map(|s| long.normalize(&s.long_image))
                .collect();
            let out = denoise_frames(generator, &inputs[..1], g.image_h, g.image_w, 1)?;
            std::hint::black_box(out);
            let t = Instant::now();
            let out = denoise_frames(generator, &inputs, g.image_h, g.image_w, 1)?;
            let latency = t.elapsed().as_secs_f64() / inputs.len().max(1) as f64;
            let (mut p, mut s, mut l) = (0.0, 0.0, 0.0);
            for (o, tg) in out.iter().zip(&targets) {
                let q = image_quality(o, tg, g.image_h, g.image_w, 1.0)?;
                p += q.psnr_db.min(100.0);
                s += q.ssim;
                l += q.mean_l1;
            }
            let n = out.len().max(1) as f64;
            Ok(ScalingRow {
                rows: g.rows,
                cols: g.cols,
                frame_h: g.image_h,
                frame_w: g.image_w,
                frames: out.len(),
                psnr_db: p / n,
                ssim: s / n,
                mean_l1: l / n,
                latency_s: latency,
                latency_per_site_s: latency / g.num_sites() as f64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::GeneratorConfig;
    use crate::simcam::sha256_hex;

    fn small() -> Generator<f32> {
        Generator::new(GeneratorConfig::with_width(0.05), &mut seed::rng(1))
    }

    #[test]
    fn batch_rows_and_skips() {
        let cfg = BenchConfig {
            iters: 3,
            warmup: 1,
            max_batch_pixels: 16 * 16 * 4,
            seed: 0,
        };
        let rows = bench_batch(&small(), 16, 16, &[1, 4, 8], &cfg).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(
            rows[0].skipped.is_none() && rows[0].latency_mean_s > 0.0 && rows[0].throughput > 0.0
        );
        assert!(rows[2].skipped.is_some());
        // throughput x latency ~ 1 for a single instance
        let r = &rows[1];
        let prod = r.throughput * r.latency_mean_s;
        assert!((0.5..2.0).contains(&prod), "{prod}");
    }

    #[test]
    fn zero_iterations_rejected() {
        let cfg = BenchConfig {
            iters: 0,
            ..BenchConfig::default()
        };
        assert!(bench_batch(&small(), 16, 16, &[1], &cfg).is_err());
    }

    #[test]
    fn parallel_aggregate_is_sum_of_instances() {
        let cfg = BenchConfig {
            iters: 3,
            warmup: 1,
            ..BenchConfig::default()
        };
        let rows = bench_parallel(&small(), 16, 16, 2, &[1, 2], &cfg).unwrap();
        for r in &rows {
            let s: f64 = r.per_instance_throughput.iter().sum();
            assert!((s - r.throughput).abs() <= 0.05 * r.throughput);
            assert_eq!(r.per_instance_throughput.len(), r.instances);
        }
    }

    #[test]
    fn benchmarking_does_not_change_outputs() {
        let g = small();
        let frames: Vec<Vec<f32>> = (0..3)
            .map(|k| (0..256).map(|i| ((i * k) % 7) as f32 * 0.1).collect())
            .collect();
        let hash = |g: &Generator<f32>| {
            let out = denoise_frames(g, &frames, 16, 16, 2).unwrap();
            let bytes: Vec<u8> = out.iter().flatten().flat_map(|v| v.to_le_bytes()).collect();
            sha256_hex(&[&bytes])
        };
        let before = hash(&g);
        bench_batch(
            &g,
            16,
            16,
            &[2],
            &BenchConfig {
                iters: 2,
                warmup: 1,
                ..BenchConfig::default()
            },
        )
        .unwrap();
        assert_eq!(before, hash(&g));
    }
}
