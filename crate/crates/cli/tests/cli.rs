use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_readout"));
    for k in [
        "READOUT_DATA_DIR",
        "READOUT_CHECKPOINT_DIR",
        "READOUT_REPORT_DIR",
    ] {
        c.env_remove(k);
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stdout);
    let line = text
        .lines()
        .last()
        .unwrap_or_else(|| panic!("no stdout; stderr: {}", String::from_utf8_lossy(&o.stderr)));
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {line}"))
}

fn ok(args: &[&str]) -> Value {
    let o = run(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout_json(&o)
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, v.to_string()).unwrap();
    p
}

fn tiny_config() -> Value {
    json!({
        "data": { "durations_ms": [40.0, 100.0], "shots_per_duration": 60 },
        "generator": { "width_mult": 0.1 },
        "discriminator": { "width_mult": 0.1 },
        "train": { "epochs": 1 },
        "classifier": { "train": { "max_epochs": 5 } },
        "sweep": {
            "methods": [
                { "kind": "threshold", "source": "raw-short" },
                { "kind": "fnn", "source": "denoised" }
            ],
            "baseline": { "kind": "threshold", "source": "raw-short" },
            "qec_method": { "kind": "fnn", "source": "denoised" }
        },
        "postselect": { "method": { "kind": "threshold", "source": "raw-short" } },
        "stitch": { "grids": [[4, 4]], "frames_per_grid": 2 },
        "qec": { "shots": 200, "rounds": 3 }
    })
}

#[test]
fn timing_reproduces_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let v = ok(&[
        "--out",
        out,
        "timing",
        "--d",
        "100",
        "--t-readout",
        "1.5e-3",
        "--t-gate",
        "5e-6",
        "--t-class",
        "4e-4",
        "--unpipelined",
    ]);
    assert!(
        (v["summary"]["seconds"].as_f64().unwrap() - 0.1905).abs() < 1e-12,
        "{v}"
    );
    let v = ok(&[
        "--out",
        out,
        "timing",
        "--d",
        "100",
        "--t-readout",
        "1.5e-3",
        "--t-gate",
        "5e-6",
        "--t-class",
        "4e-4",
        "--t-denoise",
        "1.6e-3",
        "--pipelined",
    ]);
    assert!(
        (v["summary"]["seconds"].as_f64().unwrap() - 0.1525).abs() < 1e-12,
        "{v}"
    );
    assert!(dir.path().join("reports/manifests/timing.json").exists());
}

#[test]
fn unknown_command_is_a_usage_error() {
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout_json(&o)["error"]["code"], "usage");
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn invalid_config_reports_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cases = [
        (
            json!({ "optics": { "attenuation": 0.0 } }),
            "optics.attenuation",
            "",
        ),
        (
            json!({ "qec": { "coherence": { "t1": 0.1, "t2": 0.5 } } }),
            "qec.coherence.t2",
            "2*T1",
        ),
        (
            json!({ "optics": { "brightness": 1.0 } }),
            "optics.brightness",
            "unknown",
        ),
    ];
    for (cfg, field, needle) in cases {
        let p = write_config(dir.path(), &cfg);
        let o = run(&["--config", p.to_str().unwrap(), "--out", out, "timing"]);
        assert_eq!(o.status.code(), Some(2), "{cfg}");
        let err = &stdout_json(&o)["error"];
        assert_eq!(err["code"], "invalid_config");
        assert_eq!(err["field"], field);
        assert!(err["message"].as_str().unwrap().contains(needle), "{err}");
    }
    let o = run(&["--out", out, "qec-sweep", "--t1", "0.1", "--t2", "0.3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_artifacts_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["train-denoiser"],
        vec!["qec-sweep"],
        vec!["bench"],
        vec!["eval", "--models", "fnn/denoised"],
    ] {
        let o = run(&[&["--out", out][..], &args[..]].concat());
        assert_eq!(o.status.code(), Some(3), "{args:?}");
        assert_eq!(stdout_json(&o)["error"]["code"], "missing_artifact");
    }
}

#[test]
fn env_overrides_report_dir() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("elsewhere");
    let o = bin()
        .args(["--out", dir.path().to_str().unwrap(), "timing"])
        .env("READOUT_REPORT_DIR", &reports)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(reports.join("timing.json").exists());
}

fn manifest_matches_disk(manifest: &Path) {
    let m: Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    for entry in m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .chain(m["inputs"].as_array().unwrap())
    {
        let bytes = fs::read(entry["path"].as_str().unwrap()).unwrap();
        assert_eq!(
            readout_core::simcam::sha256_hex(&[&bytes]),
            entry["sha256"].as_str().unwrap(),
            "{entry}"
        );
    }
}

#[test]
fn stepwise_pipeline_writes_complete_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &tiny_config());
    let out = dir.path().join("run");
    let base = [
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    let step = |args: &[&str]| ok(&[&base[..], args].concat());

    step(&["gen-data"]);
    step(&["train-denoiser"]);
    step(&["denoise"]);
    step(&["train-classifier", "--kind", "threshold", "--source", "raw"]);
    step(&["train-classifier", "--kind", "fnn", "--source", "denoised"]);
    let v = step(&[
        "eval",
        "--models",
        "threshold/raw,fnn/denoised",
        "--baseline",
        "threshold/raw",
        "--latency-frames",
        "2",
    ]);
    assert_eq!(v["summary"]["rows"], 4);
    let rows = fs::read_to_string(out.join("reports/eval.csv")).unwrap();
    assert!(rows.starts_with("# eval v1\n"));
    for line in rows
        .lines()
        .skip(2)
        .filter(|l| l.split(',').nth(2) == Some("threshold/raw-short"))
    {
        assert!(line.ends_with(",threshold/raw-short,0.0"), "{line}");
    }
    step(&["postselect", "--tau", "0.5,0.9,0.99"]);
    step(&["stitch", "--grids", "4x4", "--frames", "2"]);
    step(&[
        "qec-sweep",
        "--durations",
        "0.004,0.01",
        "--p-meas",
        "0.05,0.01",
        "--shots",
        "100",
    ]);
    step(&[
        "qec-sweep",
        "--durations",
        "0.004,0.006,0.01",
        "--shots",
        "100",
    ]);
    step(&["bench", "--mode", "batch", "--iters", "1", "--warmup", "1"]);
    let v = step(&["report"]);
    assert!(v["summary"]["plots"].as_array().unwrap().len() >= 3, "{v}");

    let manifests: Vec<PathBuf> = fs::read_dir(out.join("reports/manifests"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(manifests.len(), 10);
    for m in &manifests {
        manifest_matches_disk(m);
    }
}

#[test]
fn sweep_duration_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &tiny_config());
    let mut tables = Vec::new();
    for run_dir in ["a", "b"] {
        let out = dir.path().join(run_dir);
        let base = [
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ];
        ok(&[&base[..], &["sweep-duration"]].concat());
        ok(&[&base[..], &["qec-sweep"]].concat());
        let mut csvs: Vec<(String, Vec<u8>)> = fs::read_dir(out.join("reports"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    fs::read(&p).unwrap(),
                )
            })
            .collect();
        csvs.sort();
        tables.push(csvs);
    }
    let names: Vec<&str> = tables[0].iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        ["postselect.csv", "qec.csv", "sweep.csv", "train_log.csv"]
    );
    assert_eq!(tables[0], tables[1]);
}
