use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decoder::{decode, SpacetimeGraph};
use super::NoiseCurves;
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepCodeConfig {
    pub distance: usize,
    /// Noisy syndrome rounds; a perfect readout round is appended.
    pub rounds: usize,
    pub shots: usize,
    pub seed: u64,
}

impl RepCodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.distance < 3 || self.distance.is_multiple_of(2) {
            return Err(Error::config("qec.distance", "must be odd and >= 3"));
        }
        if self.rounds == 0 {
            return Err(Error::config("qec.rounds", "must be >= 1"));
        }
        if self.shots == 0 {
            return Err(Error::config("qec.shots", "must be >= 1"));
        }
        Ok(())
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Probability {
            name: name.into(),
            value: p,
        });
    }
    Ok(())
}

/// One shot: returns whether the decoded logical bit is wrong.
pub fn simulate_shot<R: Rng + ?Sized>(
    cfg: &RepCodeConfig,
    graph: &SpacetimeGraph,
    p_flip: f64,
    p_meas: f64,
    rng: &mut R,
) -> bool {
    let d = cfg.distance;
    let mut data = vec![false; d];
    let mut prev = vec![false; d - 1];
    let mut defects = Vec::new();
    for t in 0..=cfg.rounds {
        let last = t == cfg.rounds;
        if !last {
            for q in data.iter_mut() {
                if rng.random::<f64>() < p_flip {
                    *q = !*q;
                }
            }
        }
        for i in 0..d - 1 {
            let mut s = data[i] ^ data[i + 1];
            if !last && rng.random::<f64>() < p_meas {
                s = !s;
            }
            if s != prev[i] {
                defects.push((t, i));
            }
            prev[i] = s;
        }
    }
    data[0] ^ decode(graph, &defects).flips_left_qubit
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LerPoint {
    pub duration: f64,
    pub p_flip: f64,
    pub p_meas: f64,
    pub failures: usize,
    pub shots: usize,
    pub ler: f64,
    /// Binomial standard error.
    pub sigma: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval at `z` standard deviations.
pub fn wilson_interval(failures: usize, shots: usize, z: f64) -> (f64, f64) {
    let n = shots as f64;
    let p = failures as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Logical error rate at one noise point. Shots are seeded individually so
/// the result does not depend on the thread count.
pub fn logical_error_rate(
    cfg: &RepCodeConfig,
    p_flip: f64,
    p_meas: f64,
    stream: u64,
) -> Result<(usize, usize)> {
    cfg.validate()?;
    check_probability("p_flip", p_flip)?;
    check_probability("p_meas", p_meas)?;
    let graph = SpacetimeGraph::new(cfg.distance, cfg.rounds + 1, p_flip, p_meas);
    let base = seed::derive2(cfg.seed, stream, cfg.distance as u64);
    let failures = (0..cfg.shots)
        .into_par_iter()
        .filter(|&k| {
            simulate_shot(
                cfg,
                &graph,
                p_flip,
                p_meas,
                &mut seed::rng(seed::derive(base, k as u64)),
            )
        })
        .count();
    Ok((failures, cfg.shots))
}

pub fn ler_repetition_sweep(noise: &NoiseCurves, cfg: &RepCodeConfig) -> Result<Vec<LerPoint>> {
    noise.validate()?;
    noise
        .durations
        .iter()
        .enumerate()
        .map(|(k, &duration)| {
            let p_flip = noise.idle[k].bit_flip();
            let p_meas = noise.p_meas[k];
            let (failures, shots) = logical_error_rate(cfg, p_flip, p_meas, k as u64)?;
            let ler = failures as f64 / shots as f64;
            let (ci_low, ci_high) = wilson_interval(failures, shots, 1.96);
            Ok(LerPoint {
                duration,
                p_flip,
                p_meas,
                failures,
                shots,
                ler,
                sigma: (ler * (1.0 - ler) / shots as f64).sqrt(),
                ci_low,
                ci_high,
            })
        })
        .collect()
}

/// Duration with the lowest LER; ties go to the shorter duration.
pub fn find_optimal_duration(points: &[LerPoint]) -> Option<&LerPoint> {
    points.iter().min_by(|a, b| {
        a.ler
            .total_cmp(&b.ler)
            .then(a.duration.total_cmp(&b.duration))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(distance: usize, rounds: usize, shots: usize) -> RepCodeConfig {
        RepCodeConfig {
            distance,
            rounds,
            shots,
            seed: 7,
        }
    }

    #[test]
    fn noiseless_code_never_fails() {
        assert_eq!(
            logical_error_rate(&cfg(5, 10, 2000), 0.0, 0.0, 0)
                .unwrap()
                .0,
            0
        );
    }

    #[test]
    fn single_round_is_majority_vote() {
        let p = 0.1;
        let want = 3.0 * p * p * (1.0 - p) + p * p * p;
        let shots = 100_000;
        let (f, n) = logical_error_rate(&cfg(3, 1, shots), p, 0.0, 0).unwrap();
        let got = f as f64 / n as f64;
        let sigma = (want * (1.0 - want) / n as f64).sqrt();
        assert!((got - want).abs() < 3.0 * sigma, "{got} vs {want}");
    }

    #[test]
    fn larger_distance_helps_below_threshold() {
        let (f3, _) = logical_error_rate(&cfg(3, 10, 20_000), 0.02, 0.02, 0).unwrap();
        let (f5, _) = logical_error_rate(&cfg(5, 10, 20_000), 0.02, 0.02, 0).unwrap();
        assert!(f5 < f3, "{f5} vs {f3}");
    }

    #[test]
    fn deterministic_given_seed() {
        let a = logical_error_rate(&cfg(5, 5, 3000), 0.05, 0.05, 1).unwrap();
        let b = logical_error_rate(&cfg(5, 5, 3000), 0.05, 0.05, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_inputs() {
        assert!(cfg(4, 1, 1).validate().is_err());
        assert!(logical_error_rate(&cfg(3, 1, 10), 1.5, 0.0, 0).is_err());
    }

    fn point(duration: f64, ler: f64) -> LerPoint {
        LerPoint {
            duration,
            p_flip: 0.0,
            p_meas: 0.0,
            failures: 0,
            shots: 1,
            ler,
            sigma: 0.0,
            ci_low: 0.0,
            ci_high: 0.0,
        }
    }

    #[test]
    fn optimum_rules() {
        let convex = [point(1.0, 0.3), point(2.0, 0.1), point(3.0, 0.2)];
        assert_eq!(find_optimal_duration(&convex).unwrap().duration, 2.0);
        let flat = [point(3.0, 0.1), point(1.0, 0.1), point(2.0, 0.1)];
        assert_eq!(find_optimal_duration(&flat).unwrap().duration, 1.0);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 1000, 1.96);
        assert!(lo < 0.03 && 0.03 < hi);
        assert_eq!(wilson_interval(0, 100, 1.96).0, 0.0);
    }
}
