//! SVG rendering of report CSVs. Plots are derived artifacts; nothing reads
//! them back.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde_json::json;

use readout_core::pipeline::{
    read_csv, MethodRow, PostSelectRow, QecRow, StepOutput, StitchRow, TrainLogRow, Workspace,
};

use crate::failure::Failure;

type Series = Vec<(String, Vec<(f64, f64)>)>;

struct Chart<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    log_y: bool,
}

fn plot_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    readout_core::Error::Corrupt {
        path: path.to_path_buf(),
        message: format!("plot: {e}"),
    }
    .into()
}

fn bounds(series: &Series, log_y: bool) -> Option<((f64, f64), (f64, f64))> {
    let pts = series
        .iter()
        .flat_map(|(_, p)| p.iter())
        .filter(|(_, y)| y.is_finite() && (!log_y || *y > 0.0));
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return None;
    }
    let pad = |lo: f64, hi: f64| {
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (y0, y1) = if log_y {
        (y0 / 1.5, y1 * 1.5)
    } else {
        pad(y0, y1)
    };
    Some((pad(x0, x1), (y0, y1)))
}

fn line_chart(path: &Path, chart: &Chart, series: &Series) -> Result<bool, Failure> {
    let Some(((x0, x1), (y0, y1))) = bounds(series, chart.log_y) else {
        return Ok(false);
    };
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_error(path, e))?;
    let mut builder = ChartBuilder::on(&root);
    builder
        .caption(chart.title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70);
    let palette = [&BLUE, &RED, &GREEN, &MAGENTA, &CYAN, &BLACK];
    macro_rules! draw {
        ($ctx:expr) => {{
            let mut ctx = $ctx.map_err(|e| plot_error(path, e))?;
            ctx.configure_mesh()
                .x_desc(chart.x_label)
                .y_desc(chart.y_label)
                .draw()
                .map_err(|e| plot_error(path, e))?;
            for (k, (name, pts)) in series.iter().enumerate() {
                let color = palette[k % palette.len()];
                let pts: Vec<(f64, f64)> = pts
                    .iter()
                    .copied()
                    .filter(|(_, y)| y.is_finite() && (!chart.log_y || *y > 0.0))
                    .collect();
                ctx.draw_series(LineSeries::new(pts.clone(), color))
                    .map_err(|e| plot_error(path, e))?
                    .label(name.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
                ctx.draw_series(pts.into_iter().map(|p| Circle::new(p, 3, color.filled())))
                    .map_err(|e| plot_error(path, e))?;
            }
            ctx.configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(|e| plot_error(path, e))?;
        }};
    }
    if chart.log_y {
        draw!(builder.build_cartesian_2d(x0..x1, (y0..y1).log_scale()));
    } else {
        draw!(builder.build_cartesian_2d(x0..x1, y0..y1));
    }
    root.present().map_err(|e| plot_error(path, e))?;
    Ok(true)
}

fn grouped<T>(rows: &[T], key: impl Fn(&T) -> String, point: impl Fn(&T) -> (f64, f64)) -> Series {
    let mut map: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        map.entry(key(r)).or_default().push(point(r));
    }
    map.into_iter().collect()
}

/// Renders every known report present in the report directory.
pub fn render(ws: &Workspace) -> Result<StepOutput, Failure> {
    let dir = ws.paths.report_dir.join("plots");
    std::fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
    let mut out = StepOutput::default();
    let mut rendered = Vec::new();
    let mut emit = |csv: PathBuf, svg: &str, chart: Chart, series: Series| -> Result<(), Failure> {
        let target = dir.join(svg);
        if line_chart(&target, &chart, &series)? {
            out.inputs.push(csv);
            out.outputs.push(target);
            rendered.push(svg.to_string());
        }
        Ok(())
    };

    let p = ws.report("sweep.csv");
    if p.exists() {
        let rows: Vec<MethodRow> = read_csv(&p, "sweep")?;
        let s = grouped(&rows, |r| r.method.clone(), |r| (r.short_ms, r.infidelity));
        emit(
            p,
            "sweep.svg",
            Chart {
                title: "Readout infidelity",
                x_label: "short exposure (ms)",
                y_label: "infidelity",
                log_y: true,
            },
            s,
        )?;
    }
    let p = ws.report("qec.csv");
    if p.exists() {
        let rows: Vec<QecRow> = read_csv(&p, "qec")?;
        let s = grouped(
            &rows,
            |r| format!("d={}", r.distance),
            |r| (r.duration_s * 1e3, r.ler),
        );
        emit(
            p,
            "qec.svg",
            Chart {
                title: "Logical error rate",
                x_label: "readout duration (ms)",
                y_label: "LER",
                log_y: true,
            },
            s,
        )?;
    }
    let p = ws.report("train_log.csv");
    if p.exists() {
        let rows: Vec<TrainLogRow> = read_csv(&p, "train_log")?;
        let s = vec![
            (
                "train L1".to_string(),
                rows.iter().map(|r| (r.epoch as f64, r.l1)).collect(),
            ),
            (
                "val L1".to_string(),
                rows.iter().map(|r| (r.epoch as f64, r.val_l1)).collect(),
            ),
        ];
        emit(
            p,
            "train_log.svg",
            Chart {
                title: "Denoiser training",
                x_label: "epoch",
                y_label: "mean L1",
                log_y: false,
            },
            s,
        )?;
    }
    let p = ws.report("stitch.csv");
    if p.exists() {
        let rows: Vec<StitchRow> = read_csv(&p, "stitch")?;
        let s = vec![(
            "PSNR".to_string(),
            rows.iter()
                .map(|r| ((r.rows * r.cols) as f64, r.psnr_db))
                .collect(),
        )];
        emit(
            p,
            "stitch.svg",
            Chart {
                title: "Stitched-array PSNR",
                x_label: "sites",
                y_label: "PSNR (dB)",
                log_y: false,
            },
            s,
        )?;
    }
    let p = ws.report("postselect.csv");
    if p.exists() {
        let rows: Vec<PostSelectRow> = read_csv(&p, "postselect")?;
        let s = vec![
            (
                "retained fraction".to_string(),
                rows.iter().map(|r| (r.tau, r.retained_fraction)).collect(),
            ),
            (
                "retained infidelity".to_string(),
                rows.iter()
                    .map(|r| (r.tau, r.retained_infidelity))
                    .collect(),
            ),
        ];
        emit(
            p,
            "postselect.svg",
            Chart {
                title: "Post-selection",
                x_label: "tau",
                y_label: "fraction",
                log_y: false,
            },
            s,
        )?;
    }
    out.summary = json!({ "plots": rendered });
    Ok(out)
}
