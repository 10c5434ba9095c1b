//! Paired-exposure image formation.
//!
//! One shot draws a single photon-arrival realisation per site. The long
//! (primary) frame records every arrival; the short (secondary) frame keeps
//! each arrival independently with probability `attenuation`. Both frames
//! then receive their own background, electron-multiplication and read noise.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson, StandardNormal};

use super::{LatticeGeometry, OpticsConfig};
use crate::seed;
use crate::{Error, Result};

/// Each site independently bright with probability `p_bright`.
pub fn sample_states(geometry: &LatticeGeometry, p_bright: f64, rng_seed: u64) -> Vec<u8> {
    let mut rng = seed::rng(rng_seed);
    (0..geometry.num_sites())
        .map(|_| u8::from(rng.random::<f64>() < p_bright))
        .collect()
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .expect("finite positive mean")
        .sample(rng) as u64
}

/// Electron-multiplying register: Gamma(n, gain) output for n input photons.
fn em_register<R: Rng + ?Sized>(photons: u64, gain: f64, rng: &mut R) -> f64 {
    if photons == 0 {
        return 0.0;
    }
    Gamma::new(photons as f64, gain)
        .expect("positive shape and scale")
        .sample(rng)
}

/// Photon counts reaching each pixel of both paths before the camera.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonMaps {
    pub long: Vec<u64>,
    pub short: Vec<u64>,
}

/// Draws site emission and spatial spread; shared by both paths.
pub fn draw_photons<R: Rng + ?Sized>(
    states: &[u8],
    geometry: &LatticeGeometry,
    optics: &OpticsConfig,
    duration_ms: f64,
    rng: &mut R,
) -> PhotonMaps {
    let (h, w) = (geometry.image_h, geometry.image_w);
    let mut long = vec![0u64; h * w];
    let mut short = vec![0u64; h * w];
    for (site, &bright) in states.iter().enumerate() {
        let (row, col) = geometry.site_coords(site);
        let (cy, cx) = geometry.site_center(row, col);
        let rate = if bright != 0 {
            optics.bright_rate
        } else {
            optics.dark_rate
        };
        let n = poisson(rate * duration_ms, rng);
        for _ in 0..n {
            let dy: f64 = StandardNormal.sample(rng);
            let dx: f64 = StandardNormal.sample(rng);
            let kept = rng.random::<f64>() < optics.attenuation;
            let y = (cy as f64 + dy * optics.psf_sigma_px + 0.5).floor();
            let x = (cx as f64 + dx * optics.psf_sigma_px + 0.5).floor();
            if y < 0.0 || x < 0.0 || y >= h as f64 || x >= w as f64 {
                continue;
            }
            let idx = y as usize * w + x as usize;
            long[idx] += 1;
            if kept {
                short[idx] += 1;
            }
        }
    }
    PhotonMaps { long, short }
}

fn expose<R: Rng + ?Sized>(
    photons: &[u64],
    optics: &OpticsConfig,
    background_mean: f64,
    rng: &mut R,
) -> Vec<f32> {
    let read = Normal::new(0.0, optics.read_noise.max(0.0)).expect("finite std");
    photons
        .iter()
        .map(|&p| {
            let n = p + poisson(background_mean, rng);
            let counts = em_register(n, optics.em_gain, rng) + read.sample(rng) + optics.bias;
            counts as f32
        })
        .collect()
}

/// Renders the (long, short) frame pair of one shot.
pub fn render_pair(
    states: &[u8],
    geometry: &LatticeGeometry,
    optics: &OpticsConfig,
    duration_ms: f64,
    rng_seed: u64,
) -> Result<(Vec<f32>, Vec<f32>)> {
    if states.len() != geometry.num_sites() {
        return Err(Error::Shape(format!(
            "state vector has {} entries, lattice has {} sites",
            states.len(),
            geometry.num_sites()
        )));
    }
    if !(duration_ms > 0.0) {
        return Err(Error::config("duration_ms", "must be > 0"));
    }
    let mut rng = seed::rng(rng_seed);
    let maps = draw_photons(states, geometry, optics, duration_ms, &mut rng);
    let bg = optics.background_rate * duration_ms;
    let long = expose(&maps.long, optics, bg, &mut rng);
    let short = expose(&maps.short, optics, bg * optics.attenuation, &mut rng);
    Ok((long, short))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(x: f64) -> f64 {
        // Abramowitz-Stegun 7.1.26 is too coarse here; integrate instead
        let n = 20_000;
        let lo = -10.0;
        let step = (x - lo) / n as f64;
        (0..n)
            .map(|i| {
                let t = lo + (i as f64 + 0.5) * step;
                (-0.5 * t * t).exp()
            })
            .sum::<f64>()
            * step
            / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn zero_signal_frames_are_bias() {
        let optics = OpticsConfig {
            bright_rate: 0.0,
            dark_rate: 0.0,
            background_rate: 0.0,
            read_noise: 0.0,
            bias: 100.0,
            ..OpticsConfig::desk_5um()
        };
        let g = LatticeGeometry::desk_5um();
        let (l, s) = render_pair(&[1; 9], &g, &optics, 10.0, 4).unwrap();
        assert!(l.iter().chain(&s).all(|&v| v == 100.0));
    }

    #[test]
    fn rejects_wrong_state_length() {
        let g = LatticeGeometry::desk_5um();
        assert!(render_pair(&[1; 4], &g, &OpticsConfig::desk_5um(), 10.0, 0).is_err());
        assert!(render_pair(&[1; 9], &g, &OpticsConfig::desk_5um(), 0.0, 0).is_err());
    }

    #[test]
    fn state_sampling_extremes_and_frequency() {
        let g = LatticeGeometry::desk_5um();
        assert!(sample_states(&g, 0.0, 1).iter().all(|&s| s == 0));
        assert!(sample_states(&g, 1.0, 1).iter().all(|&s| s == 1));
        let mut counts = [0usize; 9];
        for k in 0..10_000 {
            for (c, s) in counts
                .iter_mut()
                .zip(sample_states(&g, 0.5, seed::derive(3, k)))
            {
                *c += s as usize;
            }
        }
        for c in counts {
            assert!((c as f64 / 1e4 - 0.5).abs() < 0.02);
        }
    }

    fn single_site_optics() -> OpticsConfig {
        OpticsConfig {
            dark_rate: 0.0,
            background_rate: 0.0,
            read_noise: 0.0,
            bias: 0.0,
            ..OpticsConfig::desk_5um()
        }
    }

    fn patch_sum(img: &[f32], g: &LatticeGeometry, site: usize) -> f64 {
        let (r, c) = g.site_coords(site);
        let (cy, cx) = g.site_center(r, c);
        let h = g.half_patch();
        let mut s = 0.0;
        for y in cy - h..=cy + h {
            for x in cx - h..=cx + h {
                s += img[y * g.image_w + x] as f64;
            }
        }
        s
    }

    #[test]
    fn mean_site_signal_matches_analytic() {
        let g = LatticeGeometry::desk_5um();
        let optics = single_site_optics();
        let duration = 10.0;
        let mut states = vec![0u8; 9];
        states[4] = 1;
        let shots = 1000;
        let (mut long_sum, mut short_sum) = (0.0, 0.0);
        for k in 0..shots {
            let (l, s) = render_pair(&states, &g, &optics, duration, seed::derive(11, k)).unwrap();
            long_sum += patch_sum(&l, &g, 4);
            short_sum += patch_sum(&s, &g, 4);
        }
        let half = g.half_patch() as f64 + 0.5;
        let axis = phi(half / optics.psf_sigma_px) - phi(-half / optics.psf_sigma_px);
        let expected = optics.em_gain * optics.bright_rate * duration * axis * axis;
        let mean_long = long_sum / shots as f64;
        assert!(
            (mean_long / expected - 1.0).abs() < 0.05,
            "{mean_long} vs {expected}"
        );
        let ratio = short_sum / long_sum;
        assert!((ratio - optics.attenuation).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn photon_counts_are_poisson() {
        // dispersion test: (n-1) s^2 / mean ~ chi^2(n-1)
        let g = LatticeGeometry::desk_5um();
        let optics = single_site_optics();
        let mut states = vec![0u8; 9];
        states[4] = 1;
        let n = 10_000usize;
        let counts: Vec<f64> = (0..n)
            .map(|k| {
                let mut rng = seed::rng(seed::derive(12, k as u64));
                let maps = draw_photons(&states, &g, &optics, 5.0, &mut rng);
                maps.long.iter().sum::<u64>() as f64
            })
            .collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let stat = (n - 1) as f64 * var / mean;
        // two-sided 1% band of chi^2 with 9999 dof (normal approximation)
        let z = (stat - (n - 1) as f64) / (2.0 * (n - 1) as f64).sqrt();
        assert!(z.abs() < 2.576, "dispersion z = {z}");
    }

    #[test]
    fn paths_are_correlated_and_shuffling_breaks_it() {
        let g = LatticeGeometry::desk_5um();
        let optics = OpticsConfig {
            background_rate: 0.0,
            read_noise: 0.0,
            ..OpticsConfig::desk_5um()
        };
        let states = vec![1u8; 9];
        let pairs: Vec<(f64, f64)> = (0..4000)
            .map(|k| {
                let (l, s) = render_pair(&states, &g, &optics, 30.0, seed::derive(13, k)).unwrap();
                (patch_sum(&l, &g, 4), patch_sum(&s, &g, 4))
            })
            .collect();
        let corr = |xs: &[(f64, f64)]| {
            let n = xs.len() as f64;
            let mx = xs.iter().map(|p| p.0).sum::<f64>() / n;
            let my = xs.iter().map(|p| p.1).sum::<f64>() / n;
            let cov = xs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
            let vx = xs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
            let vy = xs.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>();
            cov / (vx * vy).sqrt()
        };
        // independent EM draws on each path: cov = g^2 a lambda, var = 2 g^2 lambda (a for short)
        let want = optics.attenuation.sqrt() / 2.0;
        let se = (1.0 - want * want) / (pairs.len() as f64).sqrt();
        assert!(
            (corr(&pairs) - want).abs() < 4.0 * se,
            "{} vs {want}",
            corr(&pairs)
        );
        let shuffled: Vec<(f64, f64)> = (0..pairs.len())
            .map(|i| (pairs[i].0, pairs[(i * 7 + 3) % pairs.len()].1))
            .collect();
        assert!(corr(&shuffled).abs() < corr(&pairs) / 2.0);
    }
}
