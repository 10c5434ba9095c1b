use serde::{Deserialize, Serialize};
use serde_json::json;

use super::denoise::{denoise_shots, load_checkpoint};
use super::readout::{fit_classifier, frame_refs};
use super::{dataset_files, require, write_csv, StepOutput, Workspace};
use crate::classify::{ClassifierConfig, ClassifierReport, PatchSource};
use crate::config::RunConfig;
use crate::metrics::image_quality;
use crate::simcam::{
    compute_norm_stats, generate_dataset, load_dataset, save_dataset, stitch_dataset, Dataset,
    GenerateConfig, LabelSource, LatticeGeometry, ShotRecord, Split,
};
use crate::{seed, Error, Result};

/// Simulates the configured durations and stores the dataset with
/// normalisation statistics of its training split.
pub fn gen_data(cfg: &RunConfig, ws: &Workspace) -> Result<StepOutput> {
    let gen = GenerateConfig {
        durations_ms: cfg.data.durations_ms.clone(),
        shots_per_duration: cfg.data.shots_per_duration,
        p_bright: cfg.data.p_bright,
        base_seed: cfg.data_seed(),
    };
    let mut ds = generate_dataset(&cfg.geometry, &cfg.optics, &gen)?;
    ds.norm = Some(compute_norm_stats(&ds, Split::Train)?);
    let dir = ws.dataset_dir();
    save_dataset(&ds, &dir)?;
    Ok(StepOutput {
        inputs: vec![],
        outputs: dataset_files(&dir),
        summary: json!({
            "shots": ds.len(),
            "durations_ms": ds.durations,
            "train": ds.splits.train.len(),
            "val": ds.splits.val.len(),
            "test": ds.splits.test.len(),
        }),
    })
}

pub fn load_data(ws: &Workspace) -> Result<Dataset> {
    let dir = ws.dataset_dir();
    require(&dir.join("meta.json"))?;
    let ds = load_dataset(&dir)?;
    if ds.norm.is_none() {
        return Err(Error::corrupt(
            &dir,
            "dataset has no normalisation statistics",
        ));
    }
    Ok(ds)
}

/// Quality and readout fidelity of the denoiser on one lattice size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchRow {
    pub rows: usize,
    pub cols: usize,
    pub frame_h: usize,
    pub frame_w: usize,
    pub frames: usize,
    pub duration_ms: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub mean_l1: f64,
    /// Shared-model infidelity averaged over sites.
    pub infidelity: f64,
}

fn quality_row(
    ds: &Dataset,
    shots: &[&ShotRecord],
    denoised: &[Vec<f32>],
    infidelity: f64,
    duration_ms: f64,
) -> Result<StitchRow> {
    let g = &ds.geometry;
    let norm = ds.norm.expect("checked by caller");
    let (mut p, mut s, mut l) = (0.0, 0.0, 0.0);
    for (shot, out) in shots.iter().zip(denoised) {
        let target = norm.long.normalize(&shot.long_image);
        let q = image_quality(out, &target, g.image_h, g.image_w, 1.0)?;
        p += q.psnr_db;
        s += q.ssim;
        l += q.mean_l1;
    }
    let n = shots.len() as f64;
    Ok(StitchRow {
        rows: g.rows,
        cols: g.cols,
        frame_h: g.image_h,
        frame_w: g.image_w,
        frames: shots.len(),
        duration_ms,
        psnr_db: p / n,
        ssim: s / n,
        mean_l1: l / n,
        infidelity,
    })
}

/// Builds larger lattices from test-split shots, denoises them with the
/// unmodified checkpoint and scores image quality and per-site readout with a
/// model shared across sites (trained on the source lattice).
pub fn stitch(cfg: &RunConfig, ws: &Workspace) -> Result<(StepOutput, Vec<StitchRow>)> {
    let ds = load_data(ws)?;
    let ckpt_path = ws.checkpoint_path();
    let ckpt = load_checkpoint(&ckpt_path)?;
    let norm = ds.norm.expect("load_data checks norm");
    let duration = cfg
        .stitch
        .duration_ms
        .unwrap_or_else(|| ds.durations.iter().copied().fold(f64::INFINITY, f64::min));
    let batch = cfg.sweep.denoise_batch;
    let train_labels = ds.labels(cfg.data.label_source);
    let truth = ds.labels(LabelSource::Truth);

    let subset = |split: Split| -> Result<(Vec<usize>, Vec<Vec<f32>>)> {
        let idx = ds.split_at_duration(split, duration);
        if idx.is_empty() {
            return Err(Error::EmptySplit(format!("{split:?} at {duration} ms")));
        }
        let shots: Vec<&ShotRecord> = idx.iter().map(|&i| &ds.shots[i]).collect();
        let den = denoise_shots(
            &ckpt.generator,
            &norm.short,
            &shots,
            ds.geometry.image_h,
            ds.geometry.image_w,
            batch,
        )?;
        Ok((idx, den))
    };
    let (tr_idx, tr_den) = subset(Split::Train)?;
    let (va_idx, va_den) = subset(Split::Val)?;
    let (te_idx, te_den) = subset(Split::Test)?;
    let ccfg = ClassifierConfig {
        kind: cfg.sweep.qec_method.kind,
        shared: true,
        ..cfg.classifier.clone()
    };
    let model = fit_classifier(
        &ccfg,
        &ds.geometry,
        (
            &frame_refs(&tr_den),
            &tr_idx
                .iter()
                .map(|&i| train_labels[i].as_slice())
                .collect::<Vec<_>>(),
        ),
        (
            &frame_refs(&va_den),
            &va_idx
                .iter()
                .map(|&i| train_labels[i].as_slice())
                .collect::<Vec<_>>(),
        ),
        PatchSource::Denoised,
    )?;

    let infidelity_of = |geom: &LatticeGeometry,
                         frames: &[Vec<f32>],
                         labels: &[&[u8]]|
     -> Result<f64> {
        let scores = model.score_frames(&frame_refs(frames), geom)?;
        let preds: Vec<Vec<u8>> = scores
            .iter()
            .map(|r| r.iter().map(|&s| u8::from(s > 0.0)).collect())
            .collect();
        Ok(
            ClassifierReport::from_predictions("stitch", PatchSource::Denoised, &preds, labels)?
                .infidelity,
        )
    };

    let te_shots: Vec<&ShotRecord> = te_idx.iter().map(|&i| &ds.shots[i]).collect();
    let te_truth: Vec<&[u8]> = te_idx.iter().map(|&i| truth[i].as_slice()).collect();
    let mut rows = vec![quality_row(
        &ds,
        &te_shots,
        &te_den,
        infidelity_of(&ds.geometry, &te_den, &te_truth)?,
        duration,
    )?];

    let mut out = StepOutput {
        inputs: [dataset_files(&ws.dataset_dir()), vec![ckpt_path]].concat(),
        ..StepOutput::default()
    };
    for (k, grid) in cfg.stitch.grids.iter().enumerate() {
        let big = stitch_dataset(
            &ds,
            &te_idx,
            grid[0],
            grid[1],
            cfg.stitch.frames_per_grid,
            seed::derive(cfg.stitch_seed(), k as u64),
            cfg.stitch.max_frame_px,
        )?;
        let dir = ws.stitched_dir(grid[0], grid[1]);
        save_dataset(&big, &dir)?;
        out.outputs.extend(dataset_files(&dir));
        let shots: Vec<&ShotRecord> = big.shots.iter().collect();
        let g = &big.geometry;
        let den = denoise_shots(
            &ckpt.generator,
            &norm.short,
            &shots,
            g.image_h,
            g.image_w,
            1,
        )?;
        let labels: Vec<&[u8]> = big.shots.iter().map(|s| s.true_states.as_slice()).collect();
        let inf = infidelity_of(g, &den, &labels)?;
        rows.push(quality_row(&big, &shots, &den, inf, duration)?);
    }
    let csv = ws.report("stitch.csv");
    write_csv(&csv, "stitch", &rows)?;
    out.outputs.push(csv);
    out.summary = json!({ "duration_ms": duration, "rows": rows });
    Ok((out, rows))
}
