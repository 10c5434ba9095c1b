use std::fs;
use std::path::Path;

use proptest::prelude::*;
use serde_json::json;

use readout_core::classify::{ClassifierKind, ClassifierModel, PatchSource};
use readout_core::config::{MethodSpec, RunConfig};
use readout_core::pipeline::{
    eval, gen_data, load_data, qec_sweep, stitch, sweep_duration, train_classifiers, Workspace,
};
use readout_core::simcam::LatticeGeometry;
use readout_core::Error;

fn tiny() -> RunConfig {
    RunConfig::from_json(&json!({
        "data": { "durations_ms": [30.0, 60.0, 150.0], "shots_per_duration": 60 },
        "generator": { "width_mult": 0.1 },
        "discriminator": { "width_mult": 0.1 },
        "train": { "epochs": 1 },
        "classifier": { "train": { "max_epochs": 5 } },
        "sweep": {
            "methods": [
                { "kind": "threshold", "source": "raw-short" },
                { "kind": "threshold", "source": "denoised" },
                { "kind": "fnn", "source": "denoised" }
            ],
            "baseline": { "kind": "threshold", "source": "raw-short" },
            "qec_method": { "kind": "threshold", "source": "denoised" }
        },
        "postselect": { "method": { "kind": "threshold", "source": "raw-short" } },
        "stitch": { "grids": [[4, 4]], "frames_per_grid": 2 },
        "qec": { "shots": 200, "rounds": 3, "p_meas_model": "fit", "grid_points": 5 }
    }))
    .unwrap()
}

fn schema_line(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_owned()
}

#[test]
fn tiny_pipeline_through_the_library() {
    let cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::new(&cfg, dir.path());

    let (out, summary) = sweep_duration(&cfg, &ws).unwrap();
    assert!(out.outputs.iter().all(|p| p.exists()));
    assert_eq!(summary.lowest_duration_ms, 30.0);
    assert_eq!(summary.baseline, "threshold/raw-short");
    for (name, table) in [
        ("sweep.csv", "sweep"),
        ("postselect.csv", "postselect"),
        ("train_log.csv", "train_log"),
    ] {
        assert_eq!(schema_line(&ws.report(name)), format!("# {table} v1"));
    }

    let (_, rows) = stitch(&cfg, &ws).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[1].rows, rows[1].frame_h), (4, 6 + 3 * 8 + 6));
    assert!(rows.iter().all(|r| r.psnr_db.is_finite()));

    let (_, q, s) = qec_sweep(&cfg, &ws, None).unwrap();
    assert_eq!(q.len(), cfg.qec.distances.len() * cfg.qec.grid_points);
    assert_eq!(s.len(), cfg.qec.distances.len());
    assert!((q[0].duration_s - 3e-3).abs() < 1e-12);
    assert!((q[4].duration_s - 15e-3).abs() < 1e-12);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.report("qec_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["p_meas_model"], "fit");
}

#[test]
fn eval_rows_reference_the_baseline() {
    let cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::new(&cfg, dir.path());
    gen_data(&cfg, &ws).unwrap();
    let specs = [
        MethodSpec::new(ClassifierKind::Threshold, PatchSource::RawShort),
        MethodSpec::new(ClassifierKind::MatchedFilter, PatchSource::RawShort),
    ];
    train_classifiers(&cfg, &ws, &specs).unwrap();
    let (_, rows) = eval(&ws, &specs, specs[0], 0).unwrap();
    assert_eq!(rows.len(), 2 * cfg.data.durations_ms.len());
    for r in rows.iter().filter(|r| r.method == "threshold/raw-short") {
        assert_eq!(r.eta, 0.0);
    }
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.infidelity)));
}

#[test]
fn missing_inputs_are_reported() {
    let cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::new(&cfg, dir.path());
    assert!(matches!(load_data(&ws), Err(Error::Missing(_))));
    assert!(matches!(qec_sweep(&cfg, &ws, None), Err(Error::Missing(_))));
}

#[test]
fn config_round_trips_and_rejects_unknown_keys() {
    let cfg = tiny();
    let back = RunConfig::from_json(&serde_json::to_value(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
    let err = RunConfig::from_json(&json!({ "qec": { "t1": 0.1 } })).unwrap_err();
    assert!(
        matches!(err, Error::Config { ref field, .. } if field == "qec.t1"),
        "{err}"
    );
}

/// Copies the patch windows of sites `a` and `b` into each other's place.
fn swap_sites(frame: &[f32], g: &LatticeGeometry, a: usize, b: usize) -> Vec<f32> {
    let mut out = frame.to_vec();
    let hp = g.half_patch() as isize;
    let (ca, cb) = (g.site_coords(a), g.site_coords(b));
    let (pa, pb) = (g.site_center(ca.0, ca.1), g.site_center(cb.0, cb.1));
    for dy in -hp..=hp {
        for dx in -hp..=hp {
            let at = |(y, x): (usize, usize)| {
                (y as isize + dy) as usize * g.image_w + (x as isize + dx) as usize
            };
            out.swap(at(pa), at(pb));
        }
    }
    out
}

fn trained_model() -> (ClassifierModel, Vec<Vec<f32>>, LatticeGeometry) {
    let mut cfg = tiny();
    cfg.classifier.shared = false;
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::new(&cfg, dir.path());
    gen_data(&cfg, &ws).unwrap();
    let spec = MethodSpec::new(ClassifierKind::Fnn, PatchSource::RawShort);
    train_classifiers(&cfg, &ws, &[spec]).unwrap();
    let model = ClassifierModel::load(&ws.classifier_path(spec, 30.0)).unwrap();
    let ds = load_data(&ws).unwrap();
    let frames = ds
        .shots
        .iter()
        .take(8)
        .map(|s| s.short_image.clone())
        .collect();
    (model, frames, ds.geometry)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn permuting_sites_permutes_scores(a in 0usize..9, b in 0usize..9, shot in 0usize..8) {
        thread_local! {
            static FIXTURE: (ClassifierModel, Vec<Vec<f32>>, LatticeGeometry) = trained_model();
        }
        FIXTURE.with(|(model, frames, g)| {
            let mut permuted = model.clone();
            permuted.sites.swap(a, b);
            let frame = &frames[shot];
            let swapped = swap_sites(frame, g, a, b);
            let before = model.score_frames(&[frame], g).unwrap().remove(0);
            let after = permuted.score_frames(&[&swapped], g).unwrap().remove(0);
            let mut want = before.clone();
            want.swap(a, b);
            prop_assert_eq!(after, want);
            Ok(())
        })?;
    }
}
