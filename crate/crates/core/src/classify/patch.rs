use serde::{Deserialize, Serialize};

use crate::simcam::LatticeGeometry;
use crate::{Error, Result};

/// Which frame a patch was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatchSource {
    RawShort,
    Denoised,
    Long,
}

impl PatchSource {
    pub fn name(self) -> &'static str {
        match self {
            PatchSource::RawShort => "raw-short",
            PatchSource::Denoised => "denoised",
            PatchSource::Long => "long",
        }
    }
}

/// Square, odd-sized window centred on one lattice site.
#[derive(Debug, Clone, PartialEq)]
pub struct SitePatch {
    pub site: (usize, usize),
    pub pixels: Vec<f32>,
    pub source: PatchSource,
}

impl SitePatch {
    pub fn sum(&self) -> f64 {
        self.pixels.iter().map(|&v| v as f64).sum()
    }
}

fn check_frame(frame: &[f32], geometry: &LatticeGeometry) -> Result<()> {
    if frame.len() != geometry.num_pixels() {
        return Err(Error::Shape(format!(
            "frame has {} pixels but the geometry is {}x{}",
            frame.len(),
            geometry.image_h,
            geometry.image_w
        )));
    }
    Ok(())
}

/// Pixels of one site's patch, row-major.
pub fn site_pixels(frame: &[f32], geometry: &LatticeGeometry, site: usize) -> Vec<f32> {
    let (r, c) = geometry.site_coords(site);
    let (cy, cx) = geometry.site_center(r, c);
    let hp = geometry.half_patch();
    let mut out = Vec::with_capacity(geometry.patch_px * geometry.patch_px);
    for y in cy - hp..=cy + hp {
        out.extend_from_slice(
            &frame[y * geometry.image_w + cx - hp..=y * geometry.image_w + cx + hp],
        );
    }
    out
}

/// All site patches of a frame in row-major site order.
pub fn extract_patches(
    frame: &[f32],
    geometry: &LatticeGeometry,
    source: PatchSource,
) -> Result<Vec<SitePatch>> {
    check_frame(frame, geometry)?;
    Ok((0..geometry.num_sites())
        .map(|k| SitePatch {
            site: geometry.site_coords(k),
            pixels: site_pixels(frame, geometry, k),
            source,
        })
        .collect())
}

/// Patches and labels for one site (or for all sites pooled).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiteSamples {
    pub patches: Vec<Vec<f32>>,
    pub labels: Vec<u8>,
}

impl SiteSamples {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let bright = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - bright, bright)
    }

    pub fn extend(&mut self, other: &SiteSamples) {
        self.patches.extend(other.patches.iter().cloned());
        self.labels.extend_from_slice(&other.labels);
    }
}

/// Labelled patches grouped by site.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPatches {
    pub patch_px: usize,
    /// Lattice columns, used to name sites in errors.
    pub cols: usize,
    pub sites: Vec<SiteSamples>,
}

impl LabeledPatches {
    pub fn from_frames(
        frames: &[&[f32]],
        labels: &[&[u8]],
        geometry: &LatticeGeometry,
    ) -> Result<Self> {
        if frames.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} frames but {} label rows",
                frames.len(),
                labels.len()
            )));
        }
        let n_sites = geometry.num_sites();
        let mut sites = vec![SiteSamples::default(); n_sites];
        for (frame, lab) in frames.iter().zip(labels) {
            check_frame(frame, geometry)?;
            if lab.len() != n_sites {
                return Err(Error::Shape(format!(
                    "{} labels for {} sites",
                    lab.len(),
                    n_sites
                )));
            }
            for (k, s) in sites.iter_mut().enumerate() {
                s.patches.push(site_pixels(frame, geometry, k));
                s.labels.push(lab[k]);
            }
        }
        Ok(Self {
            patch_px: geometry.patch_px,
            cols: geometry.cols,
            sites,
        })
    }

    pub fn pooled(&self) -> SiteSamples {
        let mut all = SiteSamples::default();
        for s in &self.sites {
            all.extend(s);
        }
        all
    }
}
