//! Image-quality and readout-fidelity metrics.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Reconstruction quality of one frame (or an average over frames).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageQuality {
    pub psnr_db: f64,
    pub ssim: f64,
    pub mean_l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range `L`.
    pub data_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            data_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn with_range(data_range: f64) -> Self {
        Self {
            data_range,
            ..Self::default()
        }
    }

    fn constants(&self) -> (f64, f64) {
        (
            (self.k1 * self.data_range).powi(2),
            (self.k2 * self.data_range).powi(2),
        )
    }
}

fn same_len(a: &[f32], b: &[f32]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} pixels", a.len(), b.len())));
    }
    Ok(())
}

pub fn mse(a: &[f32], b: &[f32]) -> Result<f64> {
    same_len(a, b)?;
    if a.is_empty() {
        return Err(Error::Shape("empty image".into()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / a.len() as f64)
}

/// Peak signal-to-noise ratio in dB; identical images give `+inf`.
pub fn psnr(a: &[f32], b: &[f32], max_value: f64) -> Result<f64> {
    if !(max_value > 0.0) {
        return Err(Error::config("max_value", "must be > 0"));
    }
    let m = mse(a, b)?;
    Ok(if m == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (max_value * max_value / m).log10()
    })
}

pub fn mean_l1(a: &[f32], b: &[f32]) -> Result<f64> {
    same_len(a, b)?;
    if a.is_empty() {
        return Err(Error::Shape("empty image".into()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum::<f64>()
        / a.len() as f64)
}

/// Normalised 1-D Gaussian taps.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of an `h x w` image.
fn filter_valid(img: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * img[y * w + x + i])
                .sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

fn check_window(h: usize, w: usize, p: &SsimParams) -> Result<()> {
    if p.window == 0 || p.window.is_multiple_of(2) {
        return Err(Error::config("ssim.window", "must be odd"));
    }
    if h < p.window || w < p.window {
        return Err(Error::Shape(format!(
            "{h}x{w} image smaller than {0}x{0} window",
            p.window
        )));
    }
    Ok(())
}

/// Mean structural similarity over all valid Gaussian windows.
pub fn ssim(a: &[f32], b: &[f32], h: usize, w: usize, params: &SsimParams) -> Result<f64> {
    same_len(a, b)?;
    if a.len() != h * w {
        return Err(Error::Shape(format!("{} pixels for {h}x{w}", a.len())));
    }
    check_window(h, w, params)?;
    let taps = gaussian_window(params.window, params.sigma);
    let x: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let f = |img: &[f64]| filter_valid(img, h, w, &taps);
    let (mx, my, sxx, syy, sxy) = (f(&x), f(&y), f(&xx), f(&yy), f(&xy));
    let (c1, c2) = params.constants();
    let n = mx.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cxy = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

/// Mean SSIM and its gradient with respect to `a`.
pub fn ssim_grad(
    a: &[f32],
    b: &[f32],
    h: usize,
    w: usize,
    params: &SsimParams,
) -> Result<(f64, Vec<f64>)> {
    same_len(a, b)?;
    check_window(h, w, params)?;
    let k = params.window;
    let taps = gaussian_window(k, params.sigma);
    let (c1, c2) = params.constants();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let n = (oh * ow) as f64;
    let mut grad = vec![0.0; h * w];
    let mut total = 0.0;
    for oy in 0..oh {
        for ox in 0..ow {
            let (mut ux, mut uy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let g = taps[i] * taps[j];
                    let p = (oy + i) * w + ox + j;
                    let (xv, yv) = (a[p] as f64, b[p] as f64);
                    ux += g * xv;
                    uy += g * yv;
                    sxx += g * xv * xv;
                    syy += g * yv * yv;
                    sxy += g * xv * yv;
                }
            }
            let vx = sxx - ux * ux;
            let vy = syy - uy * uy;
            let cxy = sxy - ux * uy;
            let a1 = 2.0 * ux * uy + c1;
            let a2 = 2.0 * cxy + c2;
            let b1 = ux * ux + uy * uy + c1;
            let b2 = vx + vy + c2;
            total += a1 * a2 / (b1 * b2);
            // partials with respect to (ux, vx, cxy), ux held separate from the centred moments
            let d_ux = (2.0 * uy * a2) / (b1 * b2) - a1 * a2 * 2.0 * ux / (b1 * b1 * b2);
            let d_vx = -a1 * a2 / (b1 * b2 * b2);
            let d_cxy = 2.0 * a1 / (b1 * b2);
            for i in 0..k {
                for j in 0..k {
                    let g = taps[i] * taps[j];
                    let p = (oy + i) * w + ox + j;
                    let (xv, yv) = (a[p] as f64, b[p] as f64);
                    grad[p] += g * (d_ux + d_vx * 2.0 * (xv - ux) + d_cxy * (yv - uy)) / n;
                }
            }
        }
    }
    Ok((total / n, grad))
}

pub fn image_quality(
    pred: &[f32],
    target: &[f32],
    h: usize,
    w: usize,
    data_range: f64,
) -> Result<ImageQuality> {
    Ok(ImageQuality {
        psnr_db: psnr(pred, target, data_range)?,
        ssim: ssim(pred, target, h, w, &SsimParams::with_range(data_range))?,
        mean_l1: mean_l1(pred, target)?,
    })
}

/// Site-level agreement between a test and a reference readout.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrantCounts {
    /// reference bright, test bright
    pub q1: usize,
    /// reference bright, test dark
    pub q2: usize,
    /// reference dark, test dark
    pub q3: usize,
    /// reference dark, test bright
    pub q4: usize,
}

impl QuadrantCounts {
    pub fn total(&self) -> usize {
        self.q1 + self.q2 + self.q3 + self.q4
    }

    pub fn mismatch_fraction(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.q2 + self.q4) as f64 / self.total() as f64
    }
}

pub fn quadrant_analysis(
    test: &[f64],
    reference: &[f64],
    test_threshold: f64,
    ref_threshold: f64,
) -> Result<QuadrantCounts> {
    if test.len() != reference.len() {
        return Err(Error::Shape(format!(
            "{} test vs {} reference sites",
            test.len(),
            reference.len()
        )));
    }
    let mut q = QuadrantCounts::default();
    for (&t, &r) in test.iter().zip(reference) {
        match (r > ref_threshold, t > test_threshold) {
            (true, true) => q.q1 += 1,
            (true, false) => q.q2 += 1,
            (false, false) => q.q3 += 1,
            (false, true) => q.q4 += 1,
        }
    }
    Ok(q)
}

/// Per-site misclassification rate.
pub fn infidelity(pred: &[u8], truth: &[u8]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} labels",
            pred.len(),
            truth.len()
        )));
    }
    Ok(pred.iter().zip(truth).filter(|(p, t)| p != t).count() as f64 / pred.len() as f64)
}

/// Relative infidelity reduction `1 - method / baseline`.
pub fn relative_reduction(method: f64, baseline: f64) -> f64 {
    if baseline == 0.0 {
        return if method == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        };
    }
    1.0 - method / baseline
}
