use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::data::load_data;
use super::{dataset_files, require, write_csv, write_json, StepOutput, Workspace};
use crate::container::Container;
use crate::denoiser::{denoise_frames, train, Checkpoint, EpochStats, Generator};
use crate::simcam::{Dataset, NormStats, ShotRecord};
use crate::{Error, Result};

const DENOISED_KIND: &str = "denoised-frames";

/// One line of `train_log.csv`; the wall time lives in the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub lr: f64,
    pub gen_loss: f64,
    pub adversarial: f64,
    pub l1: f64,
    pub disc_loss: f64,
    pub val_l1: f64,
    pub val_psnr: f64,
    pub val_ssim: f64,
}

impl From<&EpochStats> for TrainLogRow {
    fn from(e: &EpochStats) -> Self {
        Self {
            epoch: e.epoch,
            lr: e.lr,
            gen_loss: e.gen_loss,
            adversarial: e.adversarial,
            l1: e.l1,
            disc_loss: e.disc_loss,
            val_l1: e.val_l1,
            val_psnr: e.val_psnr,
            val_ssim: e.val_ssim,
        }
    }
}

pub(crate) fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    require(path)?;
    Checkpoint::load(path)
}

pub(crate) fn denoise_shots(
    generator: &Generator<f32>,
    short: &NormStats,
    shots: &[&ShotRecord],
    h: usize,
    w: usize,
    batch: usize,
) -> Result<Vec<Vec<f32>>> {
    let inputs: Vec<Vec<f32>> = shots
        .iter()
        .map(|s| short.normalize(&s.short_image))
        .collect();
    denoise_frames(generator, &inputs, h, w, batch)
}

pub fn train_denoiser(cfg: &crate::config::RunConfig, ws: &Workspace) -> Result<StepOutput> {
    let ds = load_data(ws)?;
    let (ckpt, report) = train(&ds, &cfg.generator, &cfg.discriminator, &cfg.train)?;
    let ckpt_path = ws.checkpoint_path();
    ckpt.save(&ckpt_path)?;
    let log = ws.report("train_log.csv");
    write_csv(
        &log,
        "train_log",
        &report
            .epochs
            .iter()
            .map(TrainLogRow::from)
            .collect::<Vec<_>>(),
    )?;
    let json_path = ws.report("train_report.json");
    write_json(&json_path, &report)?;
    Ok(StepOutput {
        inputs: dataset_files(&ws.dataset_dir()),
        outputs: vec![ckpt_path, log, json_path],
        summary: json!({
            "epochs": report.epochs.len(),
            "best_epoch": report.best_epoch,
            "initial_val_l1": report.initial_val_l1,
            "best_val_l1": report.best_val_l1(),
            "train_wall_s": report.epochs.iter().map(|e| e.wall_s).sum::<f64>(),
        }),
    })
}

/// Denoises every shot of the stored dataset.
pub fn denoise(cfg: &crate::config::RunConfig, ws: &Workspace) -> Result<StepOutput> {
    let ds = load_data(ws)?;
    let ckpt_path = ws.checkpoint_path();
    let ckpt = load_checkpoint(&ckpt_path)?;
    let norm = ds.norm.expect("load_data checks norm");
    let g = &ds.geometry;
    let shots: Vec<&ShotRecord> = ds.shots.iter().collect();
    let frames = denoise_shots(
        &ckpt.generator,
        &norm.short,
        &shots,
        g.image_h,
        g.image_w,
        cfg.sweep.denoise_batch,
    )?;
    let container = Container {
        kind: DENOISED_KIND.into(),
        body: json!({ "h": g.image_h, "w": g.image_w, "count": frames.len() }),
        blobs: vec![("frames".into(), frames.concat())],
    };
    let out = ws.denoised_path();
    container.save(&out)?;
    Ok(StepOutput {
        inputs: [dataset_files(&ws.dataset_dir()), vec![ckpt_path]].concat(),
        outputs: vec![out],
        summary: json!({ "frames": frames.len() }),
    })
}

/// Denoised frames of `ds`, one per shot, in the long-path normalised scale.
pub fn load_denoised(ws: &Workspace, ds: &Dataset) -> Result<Vec<Vec<f32>>> {
    let path = ws.denoised_path();
    require(&path)?;
    let c = Container::load(&path)?;
    if c.kind != DENOISED_KIND {
        return Err(Error::corrupt(
            &path,
            format!("expected {DENOISED_KIND}, found {}", c.kind),
        ));
    }
    let px = ds.geometry.num_pixels();
    let flat = c
        .blob("frames")
        .ok_or_else(|| Error::corrupt(&path, "missing frames blob"))?;
    if flat.len() != px * ds.len() {
        return Err(Error::corrupt(
            &path,
            "frame count does not match the dataset",
        ));
    }
    Ok(flat.chunks_exact(px).map(<[f32]>::to_vec).collect())
}
