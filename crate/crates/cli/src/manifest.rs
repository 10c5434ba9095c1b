use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use readout_core::config::RunConfig;
use readout_core::pipeline::{StepOutput, Workspace};
use readout_core::simcam::sha256_hex;

use crate::failure::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance of one CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub inputs: Vec<ArtifactHash>,
    pub outputs: Vec<ArtifactHash>,
    pub wall_time_s: f64,
}

fn hash_files(paths: &[PathBuf]) -> Result<Vec<ArtifactHash>, Failure> {
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| Failure::io(p, e))?;
            Ok(ArtifactHash {
                path: p.clone(),
                sha256: sha256_hex(&[&bytes]),
            })
        })
        .collect()
}

pub fn path_for(ws: &Workspace, command: &str) -> PathBuf {
    ws.paths
        .report_dir
        .join("manifests")
        .join(format!("{command}.json"))
}

/// Hashes every input and output of `step` and writes the manifest.
pub fn write(
    command: &str,
    cfg: &RunConfig,
    ws: &Workspace,
    step: &StepOutput,
    wall_time_s: f64,
) -> Result<PathBuf, Failure> {
    let manifest = RunManifest {
        command: command.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        inputs: hash_files(&step.inputs)?,
        outputs: hash_files(&step.outputs)?,
        wall_time_s,
    };
    let path = path_for(ws, command);
    let dir: &Path = path.parent().expect("manifest has a parent");
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&path, text + "\n").map_err(|e| Failure::io(&path, e))?;
    Ok(path)
}
