use serde::{Deserialize, Serialize};
use serde_json::json;

use super::data::load_data;
use super::denoise::load_checkpoint;
use super::{dataset_files, write_csv, write_json, StepOutput, Workspace};
use crate::bench::{
    bench_batch, bench_parallel, bench_scaling, environment, BenchResult, ScalingRow,
};
use crate::config::RunConfig;
use crate::simcam::{stitch_dataset, Split};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    Batch,
    Parallel,
    Scaling,
}

impl std::str::FromStr for BenchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(BenchMode::Batch),
            "parallel" => Ok(BenchMode::Parallel),
            "scaling" => Ok(BenchMode::Scaling),
            _ => Err(Error::config(
                "bench.mode",
                format!("unknown mode {s:?} (batch|parallel|scaling)"),
            )),
        }
    }
}

/// Flat CSV view of [`BenchResult`]; per-instance rates are `;`-joined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub mode: String,
    pub frame_h: usize,
    pub frame_w: usize,
    pub batch_size: usize,
    pub instances: usize,
    pub iters: usize,
    pub warmup: usize,
    pub throughput: f64,
    pub per_instance_throughput: String,
    pub latency_mean_s: f64,
    pub latency_p50_s: f64,
    pub latency_p99_s: f64,
    pub skipped: String,
}

impl From<&BenchResult> for BenchRow {
    fn from(r: &BenchResult) -> Self {
        Self {
            mode: r.mode.clone(),
            frame_h: r.frame_h,
            frame_w: r.frame_w,
            batch_size: r.batch_size,
            instances: r.instances,
            iters: r.iters,
            warmup: r.warmup,
            throughput: r.throughput,
            per_instance_throughput: r
                .per_instance_throughput
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            latency_mean_s: r.latency_mean_s,
            latency_p50_s: r.latency_p50_s,
            latency_p99_s: r.latency_p99_s,
            skipped: r.skipped.clone().unwrap_or_default(),
        }
    }
}

/// Timing measurements of the stored checkpoint. These tables hold wall
/// times and are therefore not reproducible byte for byte.
pub fn bench(cfg: &RunConfig, ws: &Workspace, mode: BenchMode) -> Result<StepOutput> {
    let ckpt_path = ws.checkpoint_path();
    let ckpt = load_checkpoint(&ckpt_path)?;
    let b = &cfg.bench;
    let (h, w) = (cfg.geometry.image_h, cfg.geometry.image_w);
    let mut out = StepOutput {
        inputs: vec![ckpt_path],
        ..StepOutput::default()
    };
    let csv = ws.report("bench.csv");
    match mode {
        BenchMode::Batch | BenchMode::Parallel => {
            let results = if mode == BenchMode::Batch {
                bench_batch(&ckpt.generator, h, w, &b.batch_sizes, &b.run)?
            } else {
                bench_parallel(
                    &ckpt.generator,
                    h,
                    w,
                    b.parallel_batch,
                    &b.instances,
                    &b.run,
                )?
            };
            write_csv(
                &csv,
                "bench",
                &results.iter().map(BenchRow::from).collect::<Vec<_>>(),
            )?;
            out.summary = serde_json::to_value(&results)?;
        }
        BenchMode::Scaling => {
            let ds = load_data(ws)?;
            let norm = ds.norm.expect("load_data checks norm");
            let duration = ds.durations.iter().copied().fold(f64::INFINITY, f64::min);
            let test = ds.split_at_duration(Split::Test, duration);
            let grids = b
                .scaling_grids
                .iter()
                .enumerate()
                .map(|(k, g)| {
                    stitch_dataset(
                        &ds,
                        &test,
                        g[0],
                        g[1],
                        b.scaling_frames,
                        seed::derive(b.run.seed, k as u64),
                        cfg.stitch.max_frame_px,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<ScalingRow> =
                bench_scaling(&ckpt.generator, &norm.short, &norm.long, &grids, &b.run)?;
            write_csv(&csv, "bench_scaling", &rows)?;
            out.inputs.extend(dataset_files(&ws.dataset_dir()));
            out.summary = serde_json::to_value(&rows)?;
        }
    }
    let env = ws.report("bench_env.json");
    write_json(&env, &json!({ "environment": environment(), "config": b }))?;
    out.outputs = vec![csv, env];
    Ok(out)
}
