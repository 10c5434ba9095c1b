use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::readout::MethodRow;
use super::{read_csv, require, write_csv, write_json, StepOutput, Workspace};
use crate::config::{MethodSpec, PMeasModel, RunConfig};
use crate::qecmodel::{
    find_optimal_duration, ler_repetition_sweep, ExpDecayFit, LerPoint, NoiseCurves, RepCodeConfig,
};
use crate::{Error, Result};

/// `(short-path exposure in seconds, p_meas)` for `spec` from `sweep.csv`,
/// or from `eval.csv` when no sweep has run.
pub fn read_curve(ws: &Workspace, spec: MethodSpec) -> Result<(PathBuf, Vec<(f64, f64)>)> {
    let (path, table) = match ws.report("sweep.csv") {
        p if p.exists() => (p, "sweep"),
        _ => (ws.report("eval.csv"), "eval"),
    };
    require(&path)?;
    let rows: Vec<MethodRow> = read_csv(&path, table)?;
    let curve: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.method == spec.label())
        .map(|r| (r.short_ms * 1e-3, r.infidelity))
        .collect();
    if curve.is_empty() {
        return Err(Error::corrupt(
            &path,
            format!("no rows for method {}", spec.label()),
        ));
    }
    Ok((path, curve))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QecRow {
    pub distance: usize,
    pub rounds: usize,
    pub duration_s: f64,
    pub p_flip: f64,
    pub p_meas: f64,
    pub failures: usize,
    pub shots: usize,
    pub ler: f64,
    pub sigma: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl QecRow {
    fn new(distance: usize, rounds: usize, p: &LerPoint) -> Self {
        Self {
            distance,
            rounds,
            duration_s: p.duration,
            p_flip: p.p_flip,
            p_meas: p.p_meas,
            failures: p.failures,
            shots: p.shots,
            ler: p.ler,
            sigma: p.sigma,
            ci_low: p.ci_low,
            ci_high: p.ci_high,
        }
    }
}

/// Location and significance of the LER minimum for one distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QecSummary {
    pub distance: usize,
    pub optimal_duration_s: f64,
    pub optimal_ler: f64,
    /// Minimum strictly inside the duration range.
    pub interior: bool,
    /// Smallest endpoint gap `(ler_end - ler_min) / sqrt(s_end^2 + s_min^2)`.
    pub endpoint_z: f64,
}

fn summarise(distance: usize, points: &[LerPoint]) -> QecSummary {
    let best = find_optimal_duration(points).expect("non-empty sweep");
    let pos = points
        .iter()
        .position(|p| std::ptr::eq(p, best))
        .unwrap_or(0);
    let z = |e: &LerPoint| {
        let s = (e.sigma.powi(2) + best.sigma.powi(2)).sqrt();
        if s > 0.0 {
            (e.ler - best.ler) / s
        } else if e.ler > best.ler {
            f64::INFINITY
        } else {
            0.0
        }
    };
    QecSummary {
        distance,
        optimal_duration_s: best.duration,
        optimal_ler: best.ler,
        interior: pos > 0 && pos + 1 < points.len(),
        endpoint_z: z(&points[0]).min(z(&points[points.len() - 1])),
    }
}

/// Repetition-code memory experiment across readout durations, with the
/// measurement error taken from `curve` (or from the sweep report).
pub fn qec_sweep(
    cfg: &RunConfig,
    ws: &Workspace,
    curve: Option<Vec<(f64, f64)>>,
) -> Result<(StepOutput, Vec<QecRow>, Vec<QecSummary>)> {
    let (inputs, curve, model) = match curve {
        Some(c) => (vec![], c, PMeasModel::Measured),
        None => {
            let (p, c) = read_curve(ws, cfg.sweep.qec_method)?;
            let model = if c.len() >= 3 {
                cfg.qec.p_meas_model
            } else {
                PMeasModel::Measured
            };
            (vec![p], c, model)
        }
    };
    let (ts, ys): (Vec<f64>, Vec<f64>) = curve.iter().copied().unzip();
    let (noise, fit) = match model {
        PMeasModel::Measured => (
            NoiseCurves::new(&ts, &ys, &cfg.qec.coherence, cfg.qec.overhead_s)?,
            None,
        ),
        PMeasModel::Fit => {
            let fit = ExpDecayFit::fit(&ts, &ys)?;
            let (lo, hi) = ts
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| {
                    (a.min(t), b.max(t))
                });
            let n = cfg.qec.grid_points;
            let grid: Vec<f64> = (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect();
            (
                NoiseCurves::from_fit(&grid, &fit, &cfg.qec.coherence, cfg.qec.overhead_s)?,
                Some(fit),
            )
        }
    };
    let (mut rows, mut summaries) = (Vec::new(), Vec::new());
    for &distance in &cfg.qec.distances {
        let rc = RepCodeConfig {
            distance,
            rounds: cfg.qec.rounds,
            shots: cfg.qec.shots,
            seed: cfg.qec_seed(),
        };
        let points = ler_repetition_sweep(&noise, &rc)?;
        rows.extend(
            points
                .iter()
                .map(|p| QecRow::new(distance, cfg.qec.rounds, p)),
        );
        summaries.push(summarise(distance, &points));
    }
    let csv = ws.report("qec.csv");
    write_csv(&csv, "qec", &rows)?;
    let json_path = ws.report("qec_summary.json");
    write_json(
        &json_path,
        &json!({
            "coherence": cfg.qec.coherence,
            "overhead_s": cfg.qec.overhead_s,
            "p_meas_model": model,
            "fit": fit.map(|f| json!({ "a": f.a, "b": f.b, "c": f.c, "rss": f.rss })),
            "measured": curve,
            "distances": summaries,
        }),
    )?;
    let out = StepOutput {
        inputs,
        outputs: vec![csv, json_path],
        summary: serde_json::to_value(&summaries)?,
    };
    Ok((out, rows, summaries))
}
