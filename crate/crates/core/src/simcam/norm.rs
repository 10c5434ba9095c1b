use serde::{Deserialize, Serialize};

use super::{Dataset, Split};
use crate::{Error, Result};

/// Zero-centring statistics: `I' = (I - mu) / (i_max - i_min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mu: f64,
    pub i_min: f64,
    pub i_max: f64,
}

/// Independent statistics for the two imaging paths, whose intensity scales
/// differ by the attenuation factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetNorm {
    pub short: NormStats,
    pub long: NormStats,
}

impl NormStats {
    pub fn from_pixels<'a>(frames: impl IntoIterator<Item = &'a [f32]>) -> Result<Self> {
        let (mut sum, mut n) = (0.0f64, 0usize);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for f in frames {
            for &v in f {
                let v = v as f64;
                sum += v;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            n += f.len();
        }
        if n == 0 || !(hi > lo) {
            return Err(Error::DegenerateNormalization);
        }
        Ok(Self {
            mu: sum / n as f64,
            i_min: lo,
            i_max: hi,
        })
    }

    pub fn range(&self) -> f64 {
        self.i_max - self.i_min
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mu) / self.range()
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.range() + self.mu
    }

    /// Affine map without clamping; held-out values outside the training
    /// range map past +-1.
    pub fn normalize(&self, image: &[f32]) -> Vec<f32> {
        image.iter().map(|&v| self.apply(v as f64) as f32).collect()
    }

    pub fn denormalize(&self, image: &[f32]) -> Vec<f32> {
        image
            .iter()
            .map(|&v| self.invert(v as f64) as f32)
            .collect()
    }
}

/// Statistics of both paths over one split.
pub fn compute_norm_stats(dataset: &Dataset, split: Split) -> Result<DatasetNorm> {
    let idx = dataset.splits.get(split);
    if idx.is_empty() {
        return Err(Error::EmptySplit(format!("{split:?}")));
    }
    Ok(DatasetNorm {
        short: NormStats::from_pixels(
            idx.iter().map(|&i| dataset.shots[i].short_image.as_slice()),
        )?,
        long: NormStats::from_pixels(idx.iter().map(|&i| dataset.shots[i].long_image.as_slice()))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_evaluated_formula() {
        let s = NormStats {
            mu: 1.0,
            i_min: 0.0,
            i_max: 2.0,
        };
        let v: Vec<f64> = [0.0, 1.0, 2.0].iter().map(|&x| s.apply(x)).collect();
        assert_eq!(v, vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn constant_split_is_degenerate() {
        let frame = [3.0f32; 16];
        assert!(matches!(
            NormStats::from_pixels([&frame[..], &frame[..]]),
            Err(Error::DegenerateNormalization)
        ));
    }

    #[test]
    fn held_out_extremes_are_not_clamped() {
        let train = [0.0f32, 10.0, 5.0];
        let s = NormStats::from_pixels([&train[..]]).unwrap();
        let out = s.normalize(&[20.0, -10.0]);
        assert!((out[0] as f64 - (20.0 - 5.0) / 10.0).abs() < 1e-6);
        assert!((out[1] as f64 - (-10.0 - 5.0) / 10.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn normalize_inverts(mu in -100.0f64..100.0, lo in -50.0f64..0.0, span in 0.5f64..500.0, x in -1000.0f64..1000.0) {
            let s = NormStats { mu, i_min: lo, i_max: lo + span };
            prop_assert!((s.invert(s.apply(x)) - x).abs() < 1e-9);
        }
    }
}
