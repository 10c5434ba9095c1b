//! Command-level orchestration over an on-disk artifact store.
//!
//! Every stage reads its inputs from the resolved [`Paths`], writes its
//! outputs next to them and returns the list of files it touched so the
//! caller can hash them into a run manifest. CSV reports contain only
//! deterministic quantities; wall-clock times go to the JSON summaries.

mod data;
mod denoise;
mod perf;
mod qec;
mod readout;
mod tables;

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::config::{MethodSpec, Paths, RunConfig};
use crate::{Error, Result};

pub use data::{gen_data, load_data, stitch, StitchRow};
pub use denoise::{denoise, load_denoised, train_denoiser, TrainLogRow};
pub use perf::{bench, BenchMode, BenchRow};
pub use qec::{qec_sweep, read_curve, QecRow, QecSummary};
pub use readout::{
    eval, postselect, sweep_duration, train_classifiers, MethodRow, PostSelectRow, SweepSummary,
};
pub use tables::{read_csv, write_csv, CSV_SCHEMA_VERSION};

/// Resolved artifact locations under one output root.
#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    pub paths: Paths,
}

impl Workspace {
    pub fn new(cfg: &RunConfig, root: &Path) -> Self {
        Self {
            paths: cfg.paths.resolve(root),
        }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.paths.data_dir.join("dataset")
    }

    pub fn denoised_path(&self) -> PathBuf {
        self.paths.data_dir.join("denoised.ardc")
    }

    pub fn stitched_dir(&self, rows: usize, cols: usize) -> PathBuf {
        self.paths.data_dir.join(format!("stitched-{rows}x{cols}"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.paths.checkpoint_dir.join("denoiser.ardc")
    }

    pub fn classifier_path(&self, spec: MethodSpec, duration_ms: f64) -> PathBuf {
        self.paths.checkpoint_dir.join("classifiers").join(format!(
            "{}-{}-{}ms.ardc",
            spec.kind.name(),
            spec.source.name(),
            duration_ms
        ))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.paths.report_dir.join(name)
    }
}

/// Files a stage read and wrote, plus a JSON summary for the caller.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub summary: Value,
}

impl StepOutput {
    pub(crate) fn absorb(&mut self, other: StepOutput) {
        for p in other.inputs {
            if !self.inputs.contains(&p) && !self.outputs.contains(&p) {
                self.inputs.push(p);
            }
        }
        for p in other.outputs {
            if !self.outputs.contains(&p) {
                self.outputs.push(p);
            }
        }
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Missing(path.to_path_buf()))
    }
}

/// The dataset's files as written by `save_dataset`.
pub(crate) fn dataset_files(dir: &Path) -> Vec<PathBuf> {
    ["meta.json", "frames.bin", "states.bin"]
        .iter()
        .map(|f| dir.join(f))
        .collect()
}
