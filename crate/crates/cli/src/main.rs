//! `readout`: command-line driver for the readout pipeline.
//!
//! Every successful run prints a JSON result line and writes one manifest to
//! `<report_dir>/manifests/<command>.json`. Failures print a JSON error
//! object `{code, message, field?}` and exit with 2 (usage or config), 3
//! (missing artifact) or 1 (anything else).

mod args;
mod failure;
mod manifest;
mod plots;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Value};

use readout_core::config::{validate_config, RunConfig};
use readout_core::pipeline::{self, StepOutput, Workspace};
use readout_core::qecmodel::{pipeline_gap, t_pipelined, t_unpipelined, ExpDecayFit, TimingParams};

use args::{Cli, Command};
use failure::Failure;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => return failure::from_clap(e),
    };
    match run(&cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(f) => f.report(),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::from_json(&json!({}))?,
    };
    if let Some(s) = cli.seed {
        cfg = cfg.with_seed(s);
    }
    cfg.apply_env(|k| std::env::var(k).ok());
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Value, Failure> {
    let mut cfg = load_config(cli)?;
    cli.command.apply_overrides(&mut cfg)?;
    let errors = validate_config(&cfg);
    if !errors.is_empty() {
        return Err(Failure::invalid_config(errors));
    }
    let ws = Workspace::new(&cfg, &cli.out);
    let start = Instant::now();
    let step = execute(&cli.command, &cfg, &ws)?;
    let manifest = manifest::write(
        cli.command.name(),
        &cfg,
        &ws,
        &step,
        start.elapsed().as_secs_f64(),
    )?;
    Ok(json!({
        "command": cli.command.name(),
        "status": "ok",
        "manifest": manifest,
        "summary": step.summary,
    }))
}

fn execute(cmd: &Command, cfg: &RunConfig, ws: &Workspace) -> Result<StepOutput, Failure> {
    Ok(match cmd {
        Command::GenData(_) => pipeline::gen_data(cfg, ws)?,
        Command::Stitch(_) => pipeline::stitch(cfg, ws)?.0,
        Command::TrainDenoiser(_) => pipeline::train_denoiser(cfg, ws)?,
        Command::Denoise(_) => pipeline::denoise(cfg, ws)?,
        Command::TrainClassifier(a) => pipeline::train_classifiers(cfg, ws, &[a.spec()?])?,
        Command::Eval(a) => {
            let specs = a.models()?;
            pipeline::eval(ws, &specs, a.baseline(&specs)?, a.latency_frames)?.0
        }
        Command::Postselect(a) => {
            let taus = a.tau.clone().unwrap_or_else(|| cfg.postselect.taus.clone());
            pipeline::postselect(cfg, ws, &taus)?.0
        }
        Command::SweepDuration => pipeline::sweep_duration(cfg, ws)?.0,
        Command::QecSweep(a) => qec_sweep(cfg, ws, a)?,
        Command::Timing(a) => timing(ws, &a.params(&cfg.qec.timing), a.selected())?,
        Command::Bench(a) => pipeline::bench(cfg, ws, a.mode.parse()?)?,
        Command::Report => plots::render(ws)?,
    })
}

/// Explicit `--durations/--p-meas` curve, durations evaluated on an
/// exponential fit of the measured curve (linear interpolation below three
/// points), or the measured curve itself.
fn qec_sweep(cfg: &RunConfig, ws: &Workspace, a: &args::QecArgs) -> Result<StepOutput, Failure> {
    let mut source = None;
    let curve = match (&a.durations, &a.p_meas) {
        (Some(d), Some(p)) => {
            if d.len() != p.len() {
                return Err(Failure::usage(
                    "--p-meas needs one value per --durations entry",
                    Some("p_meas"),
                ));
            }
            Some(d.iter().copied().zip(p.iter().copied()).collect())
        }
        (None, Some(_)) => {
            return Err(Failure::usage(
                "--p-meas requires --durations",
                Some("p_meas"),
            ))
        }
        (Some(d), None) => {
            let (path, measured) = pipeline::read_curve(ws, cfg.sweep.qec_method)?;
            source = Some(path);
            if measured.len() >= 3 {
                let (ts, ys): (Vec<f64>, Vec<f64>) = measured.into_iter().unzip();
                let fit = ExpDecayFit::fit(&ts, &ys)?;
                Some(d.iter().map(|&t| (t, fit.eval(t))).collect())
            } else {
                Some(d.iter().map(|&t| (t, interpolate(&measured, t))).collect())
            }
        }
        (None, None) => None,
    };
    let (mut out, _, _) = pipeline::qec_sweep(cfg, ws, curve)?;
    out.inputs.extend(source);
    Ok(out)
}

/// Piecewise-linear in `t`, clamped to the end values.
fn interpolate(curve: &[(f64, f64)], t: f64) -> f64 {
    let mut pts = curve.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let w = pts
        .windows(2)
        .find(|w| t <= w[1].0)
        .expect("t inside range");
    let f = (t - w[0].0) / (w[1].0 - w[0].0);
    w[0].1 + f * (w[1].1 - w[0].1)
}

fn timing(
    ws: &Workspace,
    t: &TimingParams,
    selected: Option<&'static str>,
) -> Result<StepOutput, Failure> {
    t.validate()?;
    let summary = json!({
        "params": t,
        "t_unpipelined_s": t_unpipelined(t),
        "t_pipelined_s": t_pipelined(t),
        "gap_s": pipeline_gap(t),
        "selected": selected,
        "seconds": selected.map(|s| if s == "pipelined" { t_pipelined(t) } else { t_unpipelined(t) }),
    });
    let path = ws.report("timing.json");
    write_json(&path, &summary)?;
    Ok(StepOutput {
        inputs: vec![],
        outputs: vec![path],
        summary,
    })
}

fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(path, e))?;
    }
    std::fs::write(
        path,
        format!("{}\n", serde_json::to_string_pretty(v).expect("json value")),
    )
    .map_err(|e| Failure::io(path, e))
}
