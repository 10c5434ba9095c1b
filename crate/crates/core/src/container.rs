//! Binary model container shared by denoiser checkpoints and classifier
//! model files.
//!
//! Layout: 4-byte magic `ARDC`, `u32` format version, `u64` manifest length,
//! UTF-8 JSON manifest, then the weight blobs as little-endian `f32` in the
//! order listed by the manifest's `blobs` array.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::simcam::sha256_hex;
use crate::{Error, Result};

pub const CONTAINER_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"ARDC";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BlobEntry {
    name: String,
    len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Envelope {
    kind: String,
    blobs: Vec<BlobEntry>,
    blob_sha256: String,
    body: Value,
}

/// Named weight arrays plus a JSON body.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub body: Value,
    pub blobs: Vec<(String, Vec<f32>)>,
}

impl Container {
    pub fn blob(&self, name: &str) -> Option<&[f32]> {
        self.blobs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut weights = Vec::new();
        for (_, b) in &self.blobs {
            for v in b {
                weights.extend_from_slice(&v.to_le_bytes());
            }
        }
        let env = Envelope {
            kind: self.kind.clone(),
            blobs: self
                .blobs
                .iter()
                .map(|(n, b)| BlobEntry {
                    name: n.clone(),
                    len: b.len(),
                })
                .collect(),
            blob_sha256: sha256_hex(&[&weights]),
            body: self.body.clone(),
        };
        let manifest = serde_json::to_vec(&env)?;
        let mut out = Vec::with_capacity(16 + manifest.len() + weights.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest);
        out.extend_from_slice(&weights);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(Error::corrupt(path, "bad magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CONTAINER_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CONTAINER_VERSION,
            });
        }
        let mlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        if bytes.len() < 16 + mlen {
            return Err(Error::corrupt(path, "truncated manifest"));
        }
        let env: Envelope = serde_json::from_slice(&bytes[16..16 + mlen])
            .map_err(|e| Error::corrupt(path, e.to_string()))?;
        let weights = &bytes[16 + mlen..];
        let expected: usize = env.blobs.iter().map(|b| b.len * 4).sum();
        if weights.len() != expected {
            return Err(Error::corrupt(path, "weight section length mismatch"));
        }
        if sha256_hex(&[weights]) != env.blob_sha256 {
            return Err(Error::corrupt(path, "checksum mismatch"));
        }
        let mut offset = 0;
        let blobs = env
            .blobs
            .iter()
            .map(|b| {
                let v = weights[offset..offset + b.len * 4]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                offset += b.len * 4;
                (b.name.clone(), v)
            })
            .collect();
        Ok(Self {
            kind: env.kind,
            body: env.body,
            blobs,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        Container {
            kind: "test".into(),
            body: serde_json::json!({"a": 1}),
            blobs: vec![("w".into(), vec![1.0, -2.5, 3.25]), ("b".into(), vec![0.5])],
        }
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(Container::from_bytes(&bytes, Path::new("x")).unwrap(), c);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Container::from_bytes(&bad, Path::new("x")).is_err());
        let mut bad = bytes.clone();
        *bad.last_mut().unwrap() ^= 1;
        assert!(Container::from_bytes(&bad, Path::new("x")).is_err());
        assert!(Container::from_bytes(&bytes[..bytes.len() - 2], Path::new("x")).is_err());
        let mut bad = bytes;
        bad[4] = 7;
        assert!(matches!(
            Container::from_bytes(&bad, Path::new("x")),
            Err(Error::Version { .. })
        ));
    }
}
