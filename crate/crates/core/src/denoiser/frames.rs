use ndarray::Array4;

use crate::nn::Real;
use crate::simcam::{Dataset, DatasetNorm, Split};
use crate::Error;

/// Normalised (input, target) frame pairs of one split.
#[derive(Debug, Clone)]
pub struct PairedFrames {
    pub h: usize,
    pub w: usize,
    pub inputs: Vec<Vec<f32>>,
    pub targets: Vec<Vec<f32>>,
}

impl PairedFrames {
    pub fn from_dataset(
        dataset: &Dataset,
        split: Split,
        norm: &DatasetNorm,
        durations: Option<&[f64]>,
    ) -> Self {
        let keep = |d: f64| durations.is_none_or(|ds| ds.iter().any(|x| (x - d).abs() < 1e-9));
        let idx: Vec<usize> = dataset
            .splits
            .get(split)
            .iter()
            .copied()
            .filter(|&i| keep(dataset.shots[i].duration_ms))
            .collect();
        Self {
            h: dataset.geometry.image_h,
            w: dataset.geometry.image_w,
            inputs: idx
                .iter()
                .map(|&i| norm.short.normalize(&dataset.shots[i].short_image))
                .collect(),
            targets: idx
                .iter()
                .map(|&i| norm.long.normalize(&dataset.shots[i].long_image))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Smallest multiple of 4 that is >= `n`.
pub fn padded_dim(n: usize) -> usize {
    n.div_ceil(4) * 4
}

pub const MIN_FRAME: usize = 8;

pub fn check_frame(h: usize, w: usize) -> Result<(), Error> {
    if h < MIN_FRAME || w < MIN_FRAME {
        return Err(Error::FrameTooSmall {
            h,
            w,
            min: MIN_FRAME,
        });
    }
    Ok(())
}

fn reflect(i: usize, n: usize) -> usize {
    if i < n {
        i
    } else {
        2 * (n - 1) - i
    }
}

/// Stacks frames into (N, 1, H', W'), reflect-padding bottom and right edges
/// up to multiples of 4.
pub fn stack_padded<F: Real>(frames: &[&[f32]], h: usize, w: usize) -> Array4<F> {
    let (ph, pw) = (padded_dim(h), padded_dim(w));
    Array4::from_shape_fn((frames.len(), 1, ph, pw), |(b, _, y, x)| {
        F::of(frames[b][reflect(y, h) * w + reflect(x, w)] as f64)
    })
}

/// Crops (N, 1, H', W') back to `h x w` frames.
pub fn unstack_cropped<F: Real>(batch: &Array4<F>, h: usize, w: usize) -> Vec<Vec<f32>> {
    batch
        .outer_iter()
        .map(|s| {
            let mut v = Vec::with_capacity(h * w);
            for y in 0..h {
                for x in 0..w {
                    v.push(s[[0, y, x]].to_f32().unwrap());
                }
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pad_and_crop_round_trip() {
        let f: Vec<f32> = (0..9 * 10).map(|v| v as f32).collect();
        let b = stack_padded::<f32>(&[&f], 9, 10);
        assert_eq!(b.dim(), (1, 1, 12, 12));
        // reflected rows mirror the interior
        assert_eq!(b[[0, 0, 9, 0]], f[7 * 10]);
        assert_eq!(unstack_cropped(&b, 9, 10)[0], f);
    }

    #[test]
    fn minimum_size() {
        assert!(check_frame(7, 28).is_err());
        assert!(check_frame(8, 8).is_ok());
    }
}
