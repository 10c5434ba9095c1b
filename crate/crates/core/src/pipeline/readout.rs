use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::data::{gen_data, load_data};
use super::denoise::{denoise, load_denoised, train_denoiser};
use super::{dataset_files, require, write_csv, write_json, StepOutput, Workspace};
use crate::classify::{
    evaluate, post_select, train_classifier, ClassifierConfig, ClassifierKind, ClassifierModel,
    LabeledPatches, PatchSource,
};
use crate::config::{MethodSpec, RunConfig};
use crate::metrics::relative_reduction;
use crate::simcam::{Dataset, LabelSource, LatticeGeometry, Split};
use crate::{seed, Error, Result};

pub(crate) fn frame_refs(frames: &[Vec<f32>]) -> Vec<&[f32]> {
    frames.iter().map(|f| f.as_slice()).collect()
}

pub(crate) fn fit_classifier(
    ccfg: &ClassifierConfig,
    geometry: &LatticeGeometry,
    train: (&[&[f32]], &[&[u8]]),
    val: (&[&[f32]], &[&[u8]]),
    source: PatchSource,
) -> Result<ClassifierModel> {
    let tr = LabeledPatches::from_frames(train.0, train.1, geometry)?;
    let va = LabeledPatches::from_frames(val.0, val.1, geometry)?;
    train_classifier(&tr, &va, source, ccfg)
}

/// Per-shot frames of one dataset for every patch source.
struct FrameStore<'a> {
    ds: &'a Dataset,
    denoised: Option<Vec<Vec<f32>>>,
    denoised_path: PathBuf,
}

impl<'a> FrameStore<'a> {
    fn open(ws: &Workspace, ds: &'a Dataset, specs: &[MethodSpec]) -> Result<Self> {
        let denoised = if specs.iter().any(|s| s.source == PatchSource::Denoised) {
            Some(load_denoised(ws, ds)?)
        } else {
            None
        };
        Ok(Self {
            ds,
            denoised,
            denoised_path: ws.denoised_path(),
        })
    }

    fn frames(&self, idx: &[usize], source: PatchSource) -> Result<Vec<&[f32]>> {
        idx.iter()
            .map(|&i| match source {
                PatchSource::RawShort => Ok(self.ds.shots[i].short_image.as_slice()),
                PatchSource::Long => Ok(self.ds.shots[i].long_image.as_slice()),
                PatchSource::Denoised => self
                    .denoised
                    .as_ref()
                    .map(|d| d[i].as_slice())
                    .ok_or_else(|| Error::Missing(self.denoised_path.clone())),
            })
            .collect()
    }

    fn inputs(&self, ws: &Workspace) -> Vec<PathBuf> {
        let mut v = dataset_files(&ws.dataset_dir());
        if self.denoised.is_some() {
            v.push(self.denoised_path.clone());
        }
        v
    }
}

fn spec_stream(spec: MethodSpec) -> u64 {
    let kind = ClassifierKind::ALL
        .iter()
        .position(|&k| k == spec.kind)
        .unwrap_or(0) as u64;
    let source = match spec.source {
        PatchSource::RawShort => 0,
        PatchSource::Denoised => 1,
        PatchSource::Long => 2,
    };
    kind * 4 + source
}

fn select<'b>(labels: &'b [Vec<u8>], idx: &[usize]) -> Vec<&'b [u8]> {
    idx.iter().map(|&i| labels[i].as_slice()).collect()
}

/// Trains one model per (method, duration) on the training split, with
/// early stopping on the validation split, and stores each model file.
pub fn train_classifiers(
    cfg: &RunConfig,
    ws: &Workspace,
    specs: &[MethodSpec],
) -> Result<StepOutput> {
    let ds = load_data(ws)?;
    let store = FrameStore::open(ws, &ds, specs)?;
    let labels = ds.labels(cfg.data.label_source);
    let mut out = StepOutput {
        inputs: store.inputs(ws),
        ..StepOutput::default()
    };
    let mut params = Vec::new();
    for (di, &duration) in ds.durations.iter().enumerate() {
        let tr = ds.split_at_duration(Split::Train, duration);
        let va = ds.split_at_duration(Split::Val, duration);
        for &spec in specs {
            let mut ccfg = ClassifierConfig {
                kind: spec.kind,
                ..cfg.classifier.clone()
            };
            ccfg.train.seed =
                seed::derive2(cfg.classifier.train.seed, di as u64, spec_stream(spec));
            let model = fit_classifier(
                &ccfg,
                &ds.geometry,
                (&store.frames(&tr, spec.source)?, &select(&labels, &tr)),
                (&store.frames(&va, spec.source)?, &select(&labels, &va)),
                spec.source,
            )?;
            let path = ws.classifier_path(spec, duration);
            model.save(&path)?;
            params.push(json!({ "method": spec.label(), "duration_ms": duration, "params": model.num_params() }));
            out.outputs.push(path);
        }
    }
    out.summary = json!({ "models": params });
    Ok(out)
}

/// Test-split readout quality of one method at one duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub duration_ms: f64,
    /// Effective short-path exposure.
    pub short_ms: f64,
    pub method: String,
    pub infidelity: f64,
    pub bright_to_dark: f64,
    pub dark_to_bright: f64,
    pub evaluations: usize,
    pub baseline: String,
    /// Relative reduction against the baseline at the same duration.
    pub eta: f64,
}

fn evaluate_stored(
    ws: &Workspace,
    ds: &Dataset,
    store: &FrameStore,
    specs: &[MethodSpec],
    baseline: MethodSpec,
    latency_frames: usize,
) -> Result<(Vec<MethodRow>, Vec<Value>, Vec<PathBuf>)> {
    if !specs.contains(&baseline) {
        return Err(Error::config(
            "baseline",
            format!(
                "baseline {} is not among the evaluated methods",
                baseline.label()
            ),
        ));
    }
    let truth = ds.labels(LabelSource::Truth);
    let (mut rows, mut latency, mut models) = (Vec::new(), Vec::new(), Vec::new());
    for &duration in &ds.durations {
        let te = ds.split_at_duration(Split::Test, duration);
        let labels = select(&truth, &te);
        let mut reports = Vec::new();
        for &spec in specs {
            let path = ws.classifier_path(spec, duration);
            require(&path)?;
            let model = ClassifierModel::load(&path)?;
            let (report, _) = evaluate(
                &model,
                &spec.label(),
                &store.frames(&te, spec.source)?,
                &labels,
                &ds.geometry,
                latency_frames,
            )?;
            models.push(path);
            if let Some(l) = &report.latency {
                latency
                    .push(json!({ "method": spec.label(), "duration_ms": duration, "latency": l }));
            }
            reports.push(report);
        }
        let base = reports[specs
            .iter()
            .position(|&s| s == baseline)
            .expect("checked above")]
        .infidelity;
        for (spec, r) in specs.iter().zip(reports) {
            rows.push(MethodRow {
                duration_ms: duration,
                short_ms: ds.short_duration(duration),
                method: spec.label(),
                infidelity: r.infidelity,
                bright_to_dark: r.bright_to_dark,
                dark_to_bright: r.dark_to_bright,
                evaluations: r.evaluations,
                baseline: baseline.label(),
                eta: relative_reduction(r.infidelity, base),
            });
        }
    }
    Ok((rows, latency, models))
}

/// Evaluates stored models on the test split against ground-truth labels.
pub fn eval(
    ws: &Workspace,
    specs: &[MethodSpec],
    baseline: MethodSpec,
    latency_frames: usize,
) -> Result<(StepOutput, Vec<MethodRow>)> {
    let ds = load_data(ws)?;
    let store = FrameStore::open(ws, &ds, specs)?;
    let (rows, latency, models) =
        evaluate_stored(ws, &ds, &store, specs, baseline, latency_frames)?;
    let csv = ws.report("eval.csv");
    write_csv(&csv, "eval", &rows)?;
    let json_path = ws.report("eval.json");
    write_json(
        &json_path,
        &json!({ "baseline": baseline.label(), "latency": latency }),
    )?;
    let out = StepOutput {
        inputs: [store.inputs(ws), models].concat(),
        outputs: vec![csv, json_path],
        summary: json!({ "rows": rows.len() }),
    };
    Ok((out, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostSelectRow {
    pub duration_ms: f64,
    pub method: String,
    pub tau: f64,
    pub retained_fraction: f64,
    pub retained_infidelity: f64,
    pub unfiltered_infidelity: f64,
    pub retained: usize,
    pub total: usize,
}

/// Mixture-confidence filtering of the configured method's scores on the
/// shortest duration's test split.
pub fn postselect(
    cfg: &RunConfig,
    ws: &Workspace,
    taus: &[f64],
) -> Result<(StepOutput, Vec<PostSelectRow>)> {
    let ds = load_data(ws)?;
    let spec = cfg.postselect.method;
    let store = FrameStore::open(ws, &ds, &[spec])?;
    let duration = ds.durations.iter().copied().fold(f64::INFINITY, f64::min);
    let te = ds.split_at_duration(Split::Test, duration);
    let truth = ds.labels(LabelSource::Truth);
    let path = ws.classifier_path(spec, duration);
    require(&path)?;
    let model = ClassifierModel::load(&path)?;
    let scores = model.score_frames(&store.frames(&te, spec.source)?, &ds.geometry)?;
    let rows: Vec<PostSelectRow> = post_select(&scores, &select(&truth, &te), taus, model.shared)?
        .into_iter()
        .map(|p| PostSelectRow {
            duration_ms: duration,
            method: spec.label(),
            tau: p.tau,
            retained_fraction: p.retained_fraction,
            retained_infidelity: p.retained_infidelity,
            unfiltered_infidelity: p.unfiltered_infidelity,
            retained: p.retained,
            total: p.total,
        })
        .collect();
    let csv = ws.report("postselect.csv");
    write_csv(&csv, "postselect", &rows)?;
    let out = StepOutput {
        inputs: [store.inputs(ws), vec![path]].concat(),
        outputs: vec![csv],
        summary: json!({ "duration_ms": duration, "rows": rows }),
    };
    Ok((out, rows))
}

/// Headline numbers of a duration sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub lowest_duration_ms: f64,
    pub baseline: String,
    pub baseline_infidelity: f64,
    pub qec_method: String,
    pub qec_method_infidelity: f64,
    /// Baseline infidelity divided by the QEC method's at the lowest duration.
    pub reduction_factor: f64,
    /// Whether the baseline's infidelity never increases with duration.
    pub baseline_monotone: bool,
}

/// Full pipeline: data, denoiser, denoised frames, per-duration classifiers,
/// evaluation (`sweep.csv`) and post-selection.
pub fn sweep_duration(cfg: &RunConfig, ws: &Workspace) -> Result<(StepOutput, SweepSummary)> {
    let mut out = StepOutput::default();
    out.absorb(gen_data(cfg, ws)?);
    let train = train_denoiser(cfg, ws)?;
    let train_summary = train.summary.clone();
    out.absorb(train);
    out.absorb(denoise(cfg, ws)?);
    out.absorb(train_classifiers(cfg, ws, &cfg.sweep.methods)?);

    let ds = load_data(ws)?;
    let store = FrameStore::open(ws, &ds, &cfg.sweep.methods)?;
    let (rows, _, _) = evaluate_stored(ws, &ds, &store, &cfg.sweep.methods, cfg.sweep.baseline, 0)?;
    let csv = ws.report("sweep.csv");
    write_csv(&csv, "sweep", &rows)?;
    out.outputs.push(csv);
    let (ps, ps_rows) = postselect(cfg, ws, &cfg.postselect.taus)?;
    out.absorb(ps);

    let lowest = ds.durations.iter().copied().fold(f64::INFINITY, f64::min);
    let pick = |spec: MethodSpec, d: f64| {
        rows.iter()
            .find(|r| r.method == spec.label() && r.duration_ms == d)
            .map(|r| r.infidelity)
            .expect("every method is evaluated at every duration")
    };
    let base = pick(cfg.sweep.baseline, lowest);
    let qec = pick(cfg.sweep.qec_method, lowest);
    let base_curve: Vec<f64> = ds
        .durations
        .iter()
        .map(|&d| pick(cfg.sweep.baseline, d))
        .collect();
    let summary = SweepSummary {
        lowest_duration_ms: lowest,
        baseline: cfg.sweep.baseline.label(),
        baseline_infidelity: base,
        qec_method: cfg.sweep.qec_method.label(),
        qec_method_infidelity: qec,
        reduction_factor: if qec > 0.0 { base / qec } else { f64::INFINITY },
        baseline_monotone: base_curve.windows(2).all(|w| w[1] <= w[0]),
    };
    let json_path = ws.report("sweep_summary.json");
    write_json(
        &json_path,
        &json!({ "summary": summary, "train": train_summary, "postselect": ps_rows }),
    )?;
    out.outputs.push(json_path);
    out.summary = serde_json::to_value(&summary)?;
    Ok((out, summary))
}
