//! On-disk dataset layout.
//!
//! A dataset is a directory holding
//! - `meta.json`: geometry, optics, durations, per-shot duration and seed,
//!   splits, normalisation, format version and a SHA-256 checksum over the
//!   two binary files;
//! - `frames.bin`: little-endian `f32`, all long frames then all short
//!   frames, shot-major, row-major;
//! - `states.bin`: one byte per site per shot.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Dataset, DatasetNorm, LatticeGeometry, OpticsConfig, ShotRecord, Splits};
use crate::{Error, Result};

pub const DATASET_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "atom-readout-dataset";

#[derive(Debug, Serialize, Deserialize)]
struct ShotMeta {
    duration_ms: f64,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    magic: String,
    format_version: u32,
    geometry: LatticeGeometry,
    optics: OpticsConfig,
    durations_ms: Vec<f64>,
    shots: Vec<ShotMeta>,
    splits: Splits,
    norm: Option<DatasetNorm>,
    checksum: String,
}

pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Exact byte size of `frames.bin` for `shots` frames of `geometry`.
pub fn frames_file_len(geometry: &LatticeGeometry, shots: usize) -> usize {
    2 * shots * geometry.num_pixels() * 4
}

pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut frames = Vec::with_capacity(frames_file_len(&dataset.geometry, dataset.len()));
    for s in &dataset.shots {
        for v in &s.long_image {
            frames.extend_from_slice(&v.to_le_bytes());
        }
    }
    for s in &dataset.shots {
        for v in &s.short_image {
            frames.extend_from_slice(&v.to_le_bytes());
        }
    }
    let states: Vec<u8> = dataset
        .shots
        .iter()
        .flat_map(|s| s.true_states.iter().copied())
        .collect();
    let meta = Meta {
        magic: MAGIC.into(),
        format_version: DATASET_FORMAT_VERSION,
        geometry: dataset.geometry,
        optics: dataset.optics,
        durations_ms: dataset.durations.clone(),
        shots: dataset
            .shots
            .iter()
            .map(|s| ShotMeta {
                duration_ms: s.duration_ms,
                seed: s.seed,
            })
            .collect(),
        splits: dataset.splits.clone(),
        norm: dataset.norm,
        checksum: sha256_hex(&[&frames, &states]),
    };
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    };
    write("frames.bin", &frames)?;
    write("states.bin", &states)?;
    write("meta.json", serde_json::to_string_pretty(&meta)?.as_bytes())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read(&p).map_err(|e| Error::io(p, e))
    };
    let meta_path = dir.join("meta.json");
    let meta: Meta = serde_json::from_slice(&read("meta.json")?)
        .map_err(|e| Error::corrupt(&meta_path, e.to_string()))?;
    if meta.magic != MAGIC {
        return Err(Error::corrupt(&meta_path, "bad magic"));
    }
    if meta.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Version {
            found: meta.format_version,
            expected: DATASET_FORMAT_VERSION,
        });
    }
    let frames = read("frames.bin")?;
    let states = read("states.bin")?;
    let n = meta.shots.len();
    let g = meta.geometry;
    if frames.len() != frames_file_len(&g, n) || states.len() != n * g.num_sites() {
        return Err(Error::corrupt(dir, "truncated or oversized binary file"));
    }
    if sha256_hex(&[&frames, &states]) != meta.checksum {
        return Err(Error::corrupt(dir, "checksum mismatch"));
    }
    let px = g.num_pixels();
    let frame = |k: usize| -> Vec<f32> {
        frames[k * px * 4..(k + 1) * px * 4]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect()
    };
    let shots = meta
        .shots
        .iter()
        .enumerate()
        .map(|(k, m)| ShotRecord {
            true_states: states[k * g.num_sites()..(k + 1) * g.num_sites()].to_vec(),
            long_image: frame(k),
            short_image: frame(n + k),
            duration_ms: m.duration_ms,
            seed: m.seed,
        })
        .collect();
    Ok(Dataset {
        geometry: g,
        optics: meta.optics,
        durations: meta.durations_ms,
        shots,
        splits: meta.splits,
        norm: meta.norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcam::{compute_norm_stats, generate_dataset, GenerateConfig, Split};

    fn data(per: usize) -> Dataset {
        let mut d = generate_dataset(
            &LatticeGeometry::desk_5um(),
            &OpticsConfig::desk_5um(),
            &GenerateConfig {
                durations_ms: vec![15.0, 30.0],
                shots_per_duration: per,
                p_bright: 0.5,
                base_seed: 1,
            },
        )
        .unwrap();
        d.norm = Some(compute_norm_stats(&d, Split::Train).unwrap());
        d
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let d = data(10);
        save_dataset(&d, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), d);
    }

    #[test]
    fn file_sizes_follow_layout() {
        let dir = tempfile::tempdir().unwrap();
        let d = generate_dataset(
            &LatticeGeometry::desk_5um(),
            &OpticsConfig::desk_5um(),
            &GenerateConfig {
                durations_ms: vec![15.0],
                shots_per_duration: 1000,
                p_bright: 0.5,
                base_seed: 2,
            },
        )
        .unwrap();
        save_dataset(&d, dir.path()).unwrap();
        let frames = fs::metadata(dir.path().join("frames.bin")).unwrap().len();
        let states = fs::metadata(dir.path().join("states.bin")).unwrap().len();
        assert_eq!(frames, 2 * 1000 * 28 * 28 * 4);
        assert_eq!(states, 1000 * 9);
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&data(3), dir.path()).unwrap();
        let meta_path = dir.path().join("meta.json");
        let meta = fs::read_to_string(&meta_path).unwrap();

        fs::write(&meta_path, meta.replace(MAGIC, "not-a-dataset")).unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::Corrupt { .. })
        ));

        fs::write(
            &meta_path,
            meta.replace("\"format_version\": 1", "\"format_version\": 9"),
        )
        .unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::Version { found: 9, .. })
        ));

        fs::write(&meta_path, &meta).unwrap();
        let fp = dir.path().join("frames.bin");
        let mut frames = fs::read(&fp).unwrap();
        frames[17] ^= 0xff;
        fs::write(&fp, &frames).unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::Corrupt { .. })
        ));

        frames.truncate(frames.len() - 4);
        fs::write(&fp, &frames).unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::Corrupt { .. })
        ));
    }
}
