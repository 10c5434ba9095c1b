use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use readout_core::classify::{ClassifierKind, PatchSource};
use readout_core::config::{MethodSpec, RunConfig};
use readout_core::qecmodel::{CoherenceParams, TimingParams};

use crate::failure::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "readout",
    version,
    about = "Simulate, denoise and classify atom-array readout; model its QEC cost"
)]
pub struct Cli {
    /// JSON run configuration layered over its preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; every stage seed derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Root for relative artifact paths.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate paired short/long exposures.
    GenData(GenDataArgs),
    /// Assemble larger lattices and score the denoiser on them.
    Stitch(StitchArgs),
    /// Train the denoiser on the stored dataset.
    TrainDenoiser(TrainArgs),
    /// Denoise every stored short frame.
    Denoise(DenoiseArgs),
    /// Train one classifier per duration.
    TrainClassifier(ClassifierArgs),
    /// Evaluate stored classifiers against a baseline.
    Eval(EvalArgs),
    /// Gaussian-mixture confidence filtering.
    Postselect(PostselectArgs),
    /// Full pipeline across durations.
    SweepDuration,
    /// Repetition-code logical error rate across readout durations.
    QecSweep(QecArgs),
    /// Pipelined and unpipelined execution time.
    Timing(TimingArgs),
    /// Denoiser throughput and latency.
    Bench(BenchArgs),
    /// Render report CSVs to SVG plots.
    Report,
}

fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let (r, c) = s
        .split_once('x')
        .ok_or_else(|| format!("{s:?}: expected ROWSxCOLS"))?;
    Ok([
        r.trim().parse().map_err(|e| format!("{e}"))?,
        c.trim().parse().map_err(|e| format!("{e}"))?,
    ])
}

fn parse_source(s: &str) -> Result<PatchSource, String> {
    match s {
        "raw" | "raw-short" => Ok(PatchSource::RawShort),
        "denoised" => Ok(PatchSource::Denoised),
        "long" => Ok(PatchSource::Long),
        _ => Err(format!("{s:?}: expected raw|denoised|long")),
    }
}

fn parse_spec(s: &str) -> Result<MethodSpec, Failure> {
    let (k, src) = s.split_once('/').ok_or_else(|| {
        Failure::usage(
            format!("{s:?}: expected KIND/SOURCE, e.g. fnn/denoised"),
            Some("models"),
        )
    })?;
    let kind: ClassifierKind = k.parse()?;
    let source = parse_source(src).map_err(|m| Failure::usage(m, Some("models")))?;
    Ok(MethodSpec::new(kind, source))
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Long-path durations in ms, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub durations_ms: Option<Vec<f64>>,
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long)]
    pub p_bright: Option<f64>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub bright_rate: Option<f64>,
    #[arg(long)]
    pub dark_rate: Option<f64>,
    #[arg(long)]
    pub background_rate: Option<f64>,
    #[arg(long)]
    pub psf_sigma_px: Option<f64>,
    #[arg(long)]
    pub attenuation: Option<f64>,
    #[arg(long)]
    pub em_gain: Option<f64>,
    #[arg(long)]
    pub read_noise: Option<f64>,
    #[arg(long)]
    pub bias: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StitchArgs {
    /// Target lattices, e.g. `4x4,8x8`.
    #[arg(long, value_delimiter = ',', value_parser = parse_grid)]
    pub grids: Option<Vec<[usize; 2]>>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub max_frame_px: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub width_mult: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClassifierArgs {
    /// threshold | mf | fnn | mfnn | cnn
    #[arg(long)]
    pub kind: ClassifierKind,
    /// raw | denoised | long
    #[arg(long, value_parser = parse_source)]
    pub source: PatchSource,
    /// One model shared by every site.
    #[arg(long)]
    pub shared: bool,
}

impl ClassifierArgs {
    pub fn spec(&self) -> Result<MethodSpec, Failure> {
        Ok(MethodSpec::new(self.kind, self.source))
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Methods as KIND/SOURCE, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub models: Vec<String>,
    /// Baseline method (KIND/SOURCE); must be among `--models`.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Frames timed per method for the latency summary.
    #[arg(long, default_value_t = 100)]
    pub latency_frames: usize,
}

impl EvalArgs {
    pub fn models(&self) -> Result<Vec<MethodSpec>, Failure> {
        self.models.iter().map(|s| parse_spec(s)).collect()
    }

    pub fn baseline(&self, specs: &[MethodSpec]) -> Result<MethodSpec, Failure> {
        match &self.baseline {
            Some(b) => parse_spec(b),
            None => Ok(specs[0]),
        }
    }
}

#[derive(Debug, Args)]
pub struct PostselectArgs {
    /// Confidence thresholds, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub tau: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct QecArgs {
    /// Readout durations in seconds, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub durations: Option<Vec<f64>>,
    /// Measurement error per duration; without it `p_meas` comes from an
    /// exponential fit of the sweep curve.
    #[arg(long, value_delimiter = ',')]
    pub p_meas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub distance: Option<Vec<usize>>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long)]
    pub t1: Option<f64>,
    #[arg(long)]
    pub t2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TimingArgs {
    #[arg(long = "d")]
    pub d: Option<usize>,
    #[arg(long)]
    pub t_readout: Option<f64>,
    #[arg(long)]
    pub t_gate: Option<f64>,
    #[arg(long)]
    pub t_class: Option<f64>,
    #[arg(long)]
    pub t_denoise: Option<f64>,
    #[arg(long)]
    pub t_reset: Option<f64>,
    #[arg(long, conflicts_with = "unpipelined")]
    pub pipelined: bool,
    #[arg(long)]
    pub unpipelined: bool,
}

impl TimingArgs {
    pub fn params(&self, base: &TimingParams) -> TimingParams {
        TimingParams {
            d_rounds: self.d.unwrap_or(base.d_rounds),
            t_readout: self.t_readout.unwrap_or(base.t_readout),
            t_gate: self.t_gate.unwrap_or(base.t_gate),
            t_classification: self.t_class.unwrap_or(base.t_classification),
            t_denoise: self.t_denoise.unwrap_or(base.t_denoise),
            t_reset: self.t_reset.unwrap_or(base.t_reset),
            n_tgates: base.n_tgates,
        }
    }

    pub fn selected(&self) -> Option<&'static str> {
        if self.pipelined {
            Some("pipelined")
        } else if self.unpipelined {
            Some("unpipelined")
        } else {
            None
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// batch | parallel | scaling
    #[arg(long, default_value = "batch")]
    pub mode: String,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Stitch(_) => "stitch",
            Command::TrainDenoiser(_) => "train-denoiser",
            Command::Denoise(_) => "denoise",
            Command::TrainClassifier(_) => "train-classifier",
            Command::Eval(_) => "eval",
            Command::Postselect(_) => "postselect",
            Command::SweepDuration => "sweep-duration",
            Command::QecSweep(_) => "qec-sweep",
            Command::Timing(_) => "timing",
            Command::Bench(_) => "bench",
            Command::Report => "report",
        }
    }

    /// Folds command-line flags into the configuration before validation.
    pub fn apply_overrides(&self, cfg: &mut RunConfig) -> Result<(), Failure> {
        fn set<T: Copy>(slot: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *slot = v;
            }
        }
        match self {
            Command::GenData(a) => {
                if let Some(d) = &a.durations_ms {
                    cfg.data.durations_ms = d.clone();
                }
                set(&mut cfg.data.shots_per_duration, a.shots);
                set(&mut cfg.data.p_bright, a.p_bright);
                if a.rows.is_some() || a.cols.is_some() {
                    let g = cfg.geometry;
                    cfg.geometry = g.resized(a.rows.unwrap_or(g.rows), a.cols.unwrap_or(g.cols));
                }
                let o = &mut cfg.optics;
                set(&mut o.bright_rate, a.bright_rate);
                set(&mut o.dark_rate, a.dark_rate);
                set(&mut o.background_rate, a.background_rate);
                set(&mut o.psf_sigma_px, a.psf_sigma_px);
                set(&mut o.attenuation, a.attenuation);
                set(&mut o.em_gain, a.em_gain);
                set(&mut o.read_noise, a.read_noise);
                set(&mut o.bias, a.bias);
            }
            Command::Stitch(a) => {
                if let Some(g) = &a.grids {
                    cfg.stitch.grids = g.clone();
                }
                set(&mut cfg.stitch.frames_per_grid, a.frames);
                set(&mut cfg.stitch.max_frame_px, a.max_frame_px);
            }
            Command::TrainDenoiser(a) => {
                if let Some(w) = a.width_mult {
                    cfg.generator.width_mult = w;
                    cfg.discriminator.width_mult = w;
                }
                set(&mut cfg.train.epochs, a.epochs);
                set(&mut cfg.train.batch_size, a.batch_size);
                set(&mut cfg.train.lr, a.lr);
            }
            Command::Denoise(a) => set(&mut cfg.sweep.denoise_batch, a.batch),
            Command::TrainClassifier(a) => {
                cfg.classifier.kind = a.kind;
                cfg.classifier.shared |= a.shared;
            }
            Command::QecSweep(a) => {
                if let Some(d) = &a.distance {
                    cfg.qec.distances = d.clone();
                }
                set(&mut cfg.qec.rounds, a.rounds);
                set(&mut cfg.qec.shots, a.shots);
                let c = cfg.qec.coherence;
                cfg.qec.coherence = CoherenceParams {
                    t1: a.t1.unwrap_or(c.t1),
                    t2: a.t2.unwrap_or(c.t2),
                };
            }
            Command::Bench(a) => {
                set(&mut cfg.bench.run.iters, a.iters);
                set(&mut cfg.bench.run.warmup, a.warmup);
            }
            Command::Timing(a) => cfg.qec.timing = a.params(&cfg.qec.timing),
            Command::Eval(_)
            | Command::Postselect(_)
            | Command::SweepDuration
            | Command::Report => {}
        }
        Ok(())
    }
}
