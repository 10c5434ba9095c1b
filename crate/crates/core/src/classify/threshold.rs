use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sample mean and (population) variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian1d {
    pub mean: f64,
    pub var: f64,
}

impl Gaussian1d {
    pub fn fit(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, var })
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        -0.5 * ((x - self.mean).powi(2) / self.var
            + self.var.ln()
            + (2.0 * std::f64::consts::PI).ln())
    }
}

/// Point between the two means where both Gaussians have equal density.
///
/// Falls back to the midpoint when the variances agree to 1e-12. Zero
/// variances are floored at a tiny fraction of the mean separation so that
/// perfectly separated classes still give a finite threshold.
pub fn equal_likelihood_threshold(dark: Gaussian1d, bright: Gaussian1d) -> Result<f64> {
    let gap = bright.mean - dark.mean;
    if !gap.is_finite() || gap.abs() < 1e-12 * (1.0 + dark.mean.abs().max(bright.mean.abs())) {
        return Err(Error::config(
            "threshold",
            "class means coincide; no decision boundary",
        ));
    }
    let floor = (gap * gap * 1e-12).max(f64::MIN_POSITIVE);
    let (m0, v0) = (dark.mean, dark.var.max(floor));
    let (m1, v1) = (bright.mean, bright.var.max(floor));
    let mid = 0.5 * (m0 + m1);
    if (v0 - v1).abs() <= 1e-12 {
        return Ok(mid);
    }
    // (x-m0)^2/v0 - (x-m1)^2/v1 + ln(v0/v1) = 0
    let a = 1.0 / v0 - 1.0 / v1;
    let b = -2.0 * (m0 / v0 - m1 / v1);
    let c = m0 * m0 / v0 - m1 * m1 / v1 + (v0 / v1).ln();
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Ok(mid);
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let roots = [q / a, if q != 0.0 { c / q } else { q / a }];
    let (lo, hi) = (m0.min(m1), m0.max(m1));
    Ok(roots
        .into_iter()
        .filter(|r| r.is_finite() && *r >= lo && *r <= hi)
        .min_by(|a, b| (a - mid).abs().total_cmp(&(b - mid).abs()))
        .unwrap_or(mid))
}

/// Fits class Gaussians to scalar features and returns their crossing.
pub fn fit_scalar_threshold(
    values: &[f64],
    labels: &[u8],
) -> Result<(f64, Gaussian1d, Gaussian1d)> {
    let dark: Vec<f64> = values
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 0)
        .map(|(&v, _)| v)
        .collect();
    let bright: Vec<f64> = values
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 1)
        .map(|(&v, _)| v)
        .collect();
    let (Some(d), Some(b)) = (Gaussian1d::fit(&dark), Gaussian1d::fit(&bright)) else {
        return Err(Error::config("labels", "both classes must be present"));
    };
    Ok((equal_likelihood_threshold(d, b)?, d, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_case_is_midpoint() {
        let t = equal_likelihood_threshold(
            Gaussian1d {
                mean: 0.0,
                var: 1.0,
            },
            Gaussian1d {
                mean: 10.0,
                var: 1.0,
            },
        )
        .unwrap();
        assert!((t - 5.0).abs() < 1e-6);
    }

    #[test]
    fn unequal_variances_match_brute_force_scan() {
        for &(v1, m1) in &[(4.0, 10.0), (16.0, 10.0), (0.25, 3.0)] {
            let d = Gaussian1d {
                mean: 0.0,
                var: 1.0,
            };
            let b = Gaussian1d { mean: m1, var: v1 };
            let t = equal_likelihood_threshold(d, b).unwrap();
            // scan the log-likelihood ratio between the means for its sign change
            let n = 2_000_000;
            let mut prev = d.log_pdf(0.0) - b.log_pdf(0.0);
            let mut crossing = f64::NAN;
            for i in 1..=n {
                let x = m1 * i as f64 / n as f64;
                let r = d.log_pdf(x) - b.log_pdf(x);
                if prev > 0.0 && r <= 0.0 {
                    crossing = x;
                    break;
                }
                prev = r;
            }
            assert!((t - crossing).abs() < 1e-5, "v1={v1}: {t} vs {crossing}");
        }
    }

    #[test]
    fn equal_means_error() {
        let g = Gaussian1d {
            mean: 2.0,
            var: 1.0,
        };
        assert!(equal_likelihood_threshold(g, g).is_err());
    }

    #[test]
    fn single_class_errors() {
        assert!(fit_scalar_threshold(&[1.0, 2.0], &[1, 1]).is_err());
    }
}
