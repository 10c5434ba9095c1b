use serde::{Deserialize, Serialize};

use super::SiteSamples;
use crate::{Error, Result};

/// Unit-norm difference of class-mean patches, applied after removing the
/// dark-class mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedFilterTemplate {
    pub weights: Vec<f64>,
    pub dark_mean: Vec<f64>,
}

fn class_mean(samples: &SiteSamples, class: u8) -> Option<Vec<f64>> {
    let mut acc: Option<Vec<f64>> = None;
    let mut n = 0usize;
    for (p, &l) in samples.patches.iter().zip(&samples.labels) {
        if l != class {
            continue;
        }
        let a = acc.get_or_insert_with(|| vec![0.0; p.len()]);
        for (s, &v) in a.iter_mut().zip(p) {
            *s += v as f64;
        }
        n += 1;
    }
    acc.map(|a| a.into_iter().map(|s| s / n as f64).collect())
}

impl MatchedFilterTemplate {
    /// With `zero_mean`, the template is projected orthogonal to the
    /// all-ones patch before normalising, which makes scores insensitive to a
    /// uniform offset.
    pub fn build(samples: &SiteSamples, zero_mean: bool) -> Result<Self> {
        let (Some(dark), Some(bright)) = (class_mean(samples, 0), class_mean(samples, 1)) else {
            return Err(Error::config("labels", "both classes must be present"));
        };
        let mut w: Vec<f64> = bright.iter().zip(&dark).map(|(b, d)| b - d).collect();
        if zero_mean {
            let m = w.iter().sum::<f64>() / w.len() as f64;
            w.iter_mut().for_each(|v| *v -= m);
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-12) {
            return Err(Error::config(
                "matched_filter",
                "bright and dark mean patches are identical",
            ));
        }
        w.iter_mut().for_each(|v| *v /= norm);
        Ok(Self {
            weights: w,
            dark_mean: dark,
        })
    }

    pub fn score(&self, patch: &[f32]) -> f64 {
        self.weights
            .iter()
            .zip(&self.dark_mean)
            .zip(patch)
            .map(|((w, d), &p)| w * (p as f64 - d))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn samples() -> SiteSamples {
        SiteSamples {
            patches: vec![
                vec![0.0, 1.0, 0.0, 1.0],
                vec![2.0, 5.0, 2.0, 1.0],
                vec![0.0, 3.0, 0.0, 1.0],
                vec![4.0, 5.0, 4.0, 1.0],
            ],
            labels: vec![0, 1, 0, 1],
        }
    }

    #[test]
    fn class_means_give_zero_and_norm() {
        let s = samples();
        let t = MatchedFilterTemplate::build(&s, false).unwrap();
        let unit: f64 = t.weights.iter().map(|v| v * v).sum();
        assert!((unit - 1.0).abs() < 1e-12);
        let dark: Vec<f32> = t.dark_mean.iter().map(|&v| v as f32).collect();
        assert!(t.score(&dark).abs() < 1e-12);
        // mean bright = [3, 5, 3, 1], mean dark = [0, 2, 0, 1]
        let diff_norm = (9.0f64 + 9.0 + 9.0).sqrt();
        assert!((t.score(&[3.0, 5.0, 3.0, 1.0]) - diff_norm).abs() < 1e-9);
    }

    #[test]
    fn identical_classes_error() {
        let s = SiteSamples {
            patches: vec![vec![1.0; 4], vec![1.0; 4]],
            labels: vec![0, 1],
        };
        assert!(MatchedFilterTemplate::build(&s, false).is_err());
    }

    #[test]
    fn zero_mean_template_ignores_offsets() {
        let t = MatchedFilterTemplate::build(&samples(), true).unwrap();
        let p = [1.0f32, 2.0, 3.0, 4.0];
        let shifted: Vec<f32> = p.iter().map(|v| v + 10.0).collect();
        assert!((t.score(&p) - t.score(&shifted)).abs() < 1e-9);
    }

    #[test]
    fn beats_single_pixel_threshold_at_unit_snr() {
        // signal spread over 9 pixels with per-pixel SNR 1/3, white noise
        let signal = [1.0 / 3.0f32; 9];
        let mut rng = seed::rng(11);
        let mut draw = |n: usize| -> SiteSamples {
            let mut s = SiteSamples::default();
            for _ in 0..n {
                let l: u8 = rng.random_range(0..2);
                let p = (0..9)
                    .map(|i| {
                        signal[i] * l as f32
                            + <StandardNormal as Distribution<f64>>::sample(
                                &StandardNormal,
                                &mut rng,
                            ) as f32
                    })
                    .collect();
                s.patches.push(p);
                s.labels.push(l);
            }
            s
        };
        let train = draw(4000);
        let test = draw(20000);
        let t = MatchedFilterTemplate::build(&train, false).unwrap();
        let mf_thr = 0.5 * t.score(&signal);
        let mf_err = test
            .patches
            .iter()
            .zip(&test.labels)
            .filter(|(p, &l)| (t.score(p) > mf_thr) != (l == 1))
            .count();
        let px_err = test
            .patches
            .iter()
            .zip(&test.labels)
            .filter(|(p, &l)| (p[4] > 1.0 / 6.0) != (l == 1))
            .count();
        assert!(mf_err < px_err, "mf {mf_err} vs pixel {px_err}");
    }
}
