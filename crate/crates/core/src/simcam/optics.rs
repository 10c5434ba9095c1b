use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Photon budget, optics and camera model shared by both imaging paths.
///
/// Rates are detected photons per millisecond. Camera values are in counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticsConfig {
    pub bright_rate: f64,
    pub dark_rate: f64,
    /// Photons per pixel per millisecond.
    pub background_rate: f64,
    pub psf_sigma_px: f64,
    /// Fraction of photons routed to the short (secondary) path.
    pub attenuation: f64,
    /// Mean counts per detected photon.
    pub em_gain: f64,
    pub read_noise: f64,
    pub bias: f64,
}

impl OpticsConfig {
    /// Read-noise-limited camera with a tight spot: summing a whole patch
    /// collects far more read noise than signal at short exposures.
    pub fn desk_5um() -> Self {
        Self {
            bright_rate: 4.0,
            dark_rate: 0.005,
            background_rate: 0.002,
            psf_sigma_px: 0.8,
            attenuation: 0.1,
            em_gain: 100.0,
            read_noise: 60.0,
            bias: 100.0,
        }
    }

    /// Same camera and optics; only the lattice differs.
    pub fn desk_9um() -> Self {
        Self::desk_5um()
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("optics.bright_rate", self.bright_rate),
            ("optics.dark_rate", self.dark_rate),
            ("optics.background_rate", self.background_rate),
            ("optics.read_noise", self.read_noise),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be finite and >= 0"));
            }
        }
        if !(self.attenuation > 0.0 && self.attenuation <= 1.0) {
            return Err(Error::config("optics.attenuation", "must lie in (0, 1]"));
        }
        if !(self.em_gain > 0.0 && self.em_gain.is_finite()) {
            return Err(Error::config("optics.em_gain", "must be > 0"));
        }
        if !(self.psf_sigma_px > 0.0 && self.psf_sigma_px.is_finite()) {
            return Err(Error::config("optics.psf_sigma_px", "must be > 0"));
        }
        if !self.bias.is_finite() {
            return Err(Error::config("optics.bias", "must be finite"));
        }
        Ok(())
    }
}
