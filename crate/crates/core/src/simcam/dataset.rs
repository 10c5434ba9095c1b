use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{render_pair, sample_states, DatasetNorm, LatticeGeometry, OpticsConfig};
use crate::seed;
use crate::{Error, Result};

/// One experimental shot.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    /// Per-site state, 1 = bright.
    pub true_states: Vec<u8>,
    pub long_image: Vec<f32>,
    pub short_image: Vec<f32>,
    /// Exposure of the long path.
    pub duration_ms: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.65, 0.15, 0.20);

    /// Seeded random partition of `0..n` with the given fractions.
    pub fn random(n: usize, fractions: (f64, f64, f64), rng_seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut seed::rng(rng_seed));
        let total = fractions.0 + fractions.1 + fractions.2;
        let n_train = ((fractions.0 / total) * n as f64).round() as usize;
        let n_val = (((fractions.0 + fractions.1) / total) * n as f64).round() as usize - n_train;
        let test = idx.split_off(n_train + n_val);
        let val = idx.split_off(n_train);
        Self {
            train: idx,
            val,
            test,
        }
    }

    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Where per-site labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelSource {
    /// Simulator ground truth.
    #[default]
    Truth,
    /// Thresholded long-exposure frame, which carries realistic label noise.
    LongThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub geometry: LatticeGeometry,
    pub optics: OpticsConfig,
    pub durations: Vec<f64>,
    pub shots: Vec<ShotRecord>,
    pub splits: Splits,
    pub norm: Option<DatasetNorm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub durations_ms: Vec<f64>,
    pub shots_per_duration: usize,
    pub p_bright: f64,
    pub base_seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    /// Indices of a split restricted to one long-path duration.
    pub fn split_at_duration(&self, split: Split, duration_ms: f64) -> Vec<usize> {
        self.splits
            .get(split)
            .iter()
            .copied()
            .filter(|&i| (self.shots[i].duration_ms - duration_ms).abs() < 1e-9)
            .collect()
    }

    /// Effective exposure of the short path for a long-path duration.
    pub fn short_duration(&self, duration_ms: f64) -> f64 {
        duration_ms * self.optics.attenuation
    }

    /// Labels per shot; `LongThreshold` splits each site's long-frame patch
    /// sums with a two-means threshold fitted on the whole dataset.
    pub fn labels(&self, source: LabelSource) -> Vec<Vec<u8>> {
        match source {
            LabelSource::Truth => self.shots.iter().map(|s| s.true_states.clone()).collect(),
            LabelSource::LongThreshold => {
                let g = &self.geometry;
                let sums: Vec<Vec<f64>> = self
                    .shots
                    .iter()
                    .map(|s| {
                        (0..g.num_sites())
                            .map(|k| patch_sum(&s.long_image, g, k))
                            .collect()
                    })
                    .collect();
                let thresholds: Vec<f64> = (0..g.num_sites())
                    .map(|k| two_means_threshold(sums.iter().map(|row| row[k])))
                    .collect();
                sums.iter()
                    .map(|row| {
                        row.iter()
                            .zip(&thresholds)
                            .map(|(s, t)| u8::from(s > t))
                            .collect()
                    })
                    .collect()
            }
        }
    }
}

pub(crate) fn patch_sum(img: &[f32], g: &LatticeGeometry, site: usize) -> f64 {
    let (r, c) = g.site_coords(site);
    let (cy, cx) = g.site_center(r, c);
    let h = g.half_patch();
    let mut s = 0.0;
    for y in cy - h..=cy + h {
        for v in &img[y * g.image_w + cx - h..=y * g.image_w + cx + h] {
            s += *v as f64;
        }
    }
    s
}

fn two_means_threshold(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let mut t = 0.5 * (lo + hi);
    for _ in 0..100 {
        let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0usize, 0.0, 0usize);
        for &x in &v {
            if x > t {
                s1 += x;
                n1 += 1;
            } else {
                s0 += x;
                n0 += 1;
            }
        }
        if n0 == 0 || n1 == 0 {
            break;
        }
        let next = 0.5 * (s0 / n0 as f64 + s1 / n1 as f64);
        if (next - t).abs() < 1e-9 {
            break;
        }
        t = next;
    }
    t
}

/// Generates `shots_per_duration` shots for every duration.
///
/// Shot `k` (duration-major) is seeded with `derive(base_seed, k)`, so the
/// output does not depend on the number of worker threads.
pub fn generate_dataset(
    geometry: &LatticeGeometry,
    optics: &OpticsConfig,
    config: &GenerateConfig,
) -> Result<Dataset> {
    geometry.validate()?;
    optics.validate()?;
    if config.durations_ms.is_empty() {
        return Err(Error::config("durations_ms", "must not be empty"));
    }
    if !(0.0..=1.0).contains(&config.p_bright) {
        return Err(Error::Probability {
            name: "p_bright".into(),
            value: config.p_bright,
        });
    }
    let per = config.shots_per_duration;
    let total = per * config.durations_ms.len();
    let shots = (0..total)
        .into_par_iter()
        .map(|k| {
            let duration_ms = config.durations_ms[k / per];
            let shot_seed = seed::derive(config.base_seed, k as u64);
            let states = sample_states(geometry, config.p_bright, seed::derive(shot_seed, 0));
            let (long_image, short_image) = render_pair(
                &states,
                geometry,
                optics,
                duration_ms,
                seed::derive(shot_seed, 1),
            )?;
            Ok(ShotRecord {
                true_states: states,
                long_image,
                short_image,
                duration_ms,
                seed: shot_seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let splits = Splits::random(
        total,
        Splits::DEFAULT_FRACTIONS,
        seed::derive(config.base_seed, u64::MAX),
    );
    Ok(Dataset {
        geometry: *geometry,
        optics: *optics,
        durations: config.durations_ms.clone(),
        shots,
        splits,
        norm: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, per: usize) -> Dataset {
        generate_dataset(
            &LatticeGeometry::desk_5um(),
            &OpticsConfig::desk_5um(),
            &GenerateConfig {
                durations_ms: vec![15.0, 100.0],
                shots_per_duration: per,
                p_bright: 0.5,
                base_seed: seed,
            },
        )
        .unwrap()
    }

    #[test]
    fn splits_partition_all_shots() {
        let s = Splits::random(1000, Splits::DEFAULT_FRACTIONS, 3);
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (650, 150, 200));
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.val)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn generation_is_deterministic_and_thread_independent() {
        let a = small(5, 20);
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| small(5, 20));
        assert_eq!(a, b);
        assert_ne!(a.shots[0], small(6, 20).shots[0]);
        assert_eq!(
            a.split_at_duration(Split::Train, 15.0).len()
                + a.split_at_duration(Split::Train, 100.0).len(),
            a.splits.train.len()
        );
    }

    #[test]
    fn short_durations_follow_attenuation() {
        let d = small(1, 1);
        let shorts: Vec<f64> = [15.0, 100.0].iter().map(|&t| d.short_duration(t)).collect();
        assert!((shorts[0] - 1.5).abs() < 1e-12 && (shorts[1] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_shots_is_empty_but_valid() {
        let d = small(1, 0);
        assert!(d.is_empty());
        assert!(d.splits.train.is_empty() && d.splits.test.is_empty());
    }

    #[test]
    fn long_threshold_labels_mostly_agree_at_high_snr() {
        let d = small(2, 50);
        let noisy = d.labels(LabelSource::LongThreshold);
        let truth = d.labels(LabelSource::Truth);
        let idx = d.split_at_duration(Split::Train, 100.0);
        let (mut agree, mut total) = (0, 0);
        for i in idx
            .iter()
            .copied()
            .chain(d.split_at_duration(Split::Test, 100.0))
        {
            for (a, b) in noisy[i].iter().zip(&truth[i]) {
                agree += usize::from(a == b);
                total += 1;
            }
        }
        assert!(agree as f64 / total as f64 > 0.95);
    }
}
