use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MAX_ITERS: usize = 200;
const TOL: f64 = 1e-8;

/// Two-component 1-D Gaussian mixture; component 1 has the higher mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub vars: [f64; 2],
    pub iterations: usize,
    pub log_likelihood: f64,
}

fn log_normal(x: f64, m: f64, v: f64) -> f64 {
    -0.5 * ((x - m).powi(2) / v + v.ln() + (2.0 * std::f64::consts::PI).ln())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

impl GmmModel {
    /// Posterior probability of each component.
    pub fn responsibilities(&self, x: f64) -> [f64; 2] {
        let l0 = self.weights[0].ln() + log_normal(x, self.means[0], self.vars[0]);
        let l1 = self.weights[1].ln() + log_normal(x, self.means[1], self.vars[1]);
        let m = l0.max(l1);
        let (e0, e1) = ((l0 - m).exp(), (l1 - m).exp());
        [e0 / (e0 + e1), e1 / (e0 + e1)]
    }

    pub fn confidence(&self, x: f64) -> f64 {
        let r = self.responsibilities(x);
        r[0].max(r[1])
    }

    pub fn label(&self, x: f64) -> u8 {
        let r = self.responsibilities(x);
        u8::from(r[1] > r[0])
    }
}

enum Outcome {
    Converged(GmmModel),
    Degenerate,
}

fn run_em(xs: &[f64], mut w: [f64; 2], mut m: [f64; 2], mut v: [f64; 2], floor: f64) -> Outcome {
    let n = xs.len() as f64;
    let mut prev = f64::NEG_INFINITY;
    let mut resp = vec![0.0f64; xs.len()];
    for it in 0..MAX_ITERS {
        let mut ll = 0.0;
        for (r, &x) in resp.iter_mut().zip(xs) {
            let l0 = w[0].ln() + log_normal(x, m[0], v[0]);
            let l1 = w[1].ln() + log_normal(x, m[1], v[1]);
            let mx = l0.max(l1);
            let s = (l0 - mx).exp() + (l1 - mx).exp();
            ll += mx + s.ln();
            *r = (l1 - mx).exp() / s;
        }
        let n1: f64 = resp.iter().sum();
        let n0 = n - n1;
        if n0 < 1e-9 || n1 < 1e-9 {
            return Outcome::Degenerate;
        }
        m = [
            resp.iter().zip(xs).map(|(r, x)| (1.0 - r) * x).sum::<f64>() / n0,
            resp.iter().zip(xs).map(|(r, x)| r * x).sum::<f64>() / n1,
        ];
        v = [
            resp.iter()
                .zip(xs)
                .map(|(r, x)| (1.0 - r) * (x - m[0]).powi(2))
                .sum::<f64>()
                / n0,
            resp.iter()
                .zip(xs)
                .map(|(r, x)| r * (x - m[1]).powi(2))
                .sum::<f64>()
                / n1,
        ];
        w = [n0 / n, n1 / n];
        if !(v[0] > floor && v[1] > floor) || !m[0].is_finite() || !m[1].is_finite() {
            return Outcome::Degenerate;
        }
        let avg = ll / n;
        if (avg - prev).abs() < TOL {
            return Outcome::Converged(order(w, m, v, it + 1, ll));
        }
        prev = avg;
    }
    let ll = xs
        .iter()
        .map(|&x| {
            let a = w[0].ln() + log_normal(x, m[0], v[0]);
            let b = w[1].ln() + log_normal(x, m[1], v[1]);
            let mx = a.max(b);
            mx + ((a - mx).exp() + (b - mx).exp()).ln()
        })
        .sum();
    Outcome::Converged(order(w, m, v, MAX_ITERS, ll))
}

fn order(
    w: [f64; 2],
    m: [f64; 2],
    v: [f64; 2],
    iterations: usize,
    log_likelihood: f64,
) -> GmmModel {
    if m[0] <= m[1] {
        GmmModel {
            weights: w,
            means: m,
            vars: v,
            iterations,
            log_likelihood,
        }
    } else {
        GmmModel {
            weights: [w[1], w[0]],
            means: [m[1], m[0]],
            vars: [v[1], v[0]],
            iterations,
            log_likelihood,
        }
    }
}

/// EM fit initialised from score quantiles; a collapsed component triggers
/// one restart from wider quantiles before giving up.
pub fn gmm_fit(scores: &[f64]) -> Result<GmmModel> {
    let mut sorted: Vec<f64> = scores.to_vec();
    if sorted.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateMixture("non-finite score".into()));
    }
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 2 {
        return Err(Error::DegenerateMixture(
            "need at least two distinct scores".into(),
        ));
    }
    let mut all: Vec<f64> = scores.to_vec();
    all.sort_by(f64::total_cmp);
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let floor = var * 1e-12;
    for (lo, hi, vscale) in [(0.25, 0.75, 0.25), (0.05, 0.95, 1.0)] {
        let (a, b) = (quantile(&all, lo), quantile(&all, hi));
        if b - a <= 0.0 {
            continue;
        }
        if let Outcome::Converged(g) = run_em(
            &all,
            [0.5, 0.5],
            [a, b],
            [var * vscale, var * vscale],
            floor,
        ) {
            return Ok(g);
        }
    }
    Err(Error::DegenerateMixture(
        "component variance collapsed after re-initialisation".into(),
    ))
}

/// Keeps scores whose larger posterior is at least `tau`; labels follow the
/// more probable component (higher mean = bright).
pub fn confidence_filter(scores: &[f64], gmm: &GmmModel, tau: f64) -> Result<(Vec<bool>, Vec<u8>)> {
    if !(0.5..1.0).contains(&tau) {
        return Err(Error::Probability {
            name: "tau".into(),
            value: tau,
        });
    }
    Ok(scores
        .iter()
        .map(|&s| (gmm.confidence(s) >= tau, gmm.label(s)))
        .unzip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn mixture(n: usize) -> Vec<f64> {
        let mut rng = seed::rng(5);
        let a = Normal::new(0.0, 1.0).unwrap();
        let b = Normal::new(10.0, 1.0).unwrap();
        (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    a.sample(&mut rng)
                } else {
                    b.sample(&mut rng)
                }
            })
            .collect()
    }

    #[test]
    fn recovers_known_mixture() {
        let g = gmm_fit(&mixture(10_000)).unwrap();
        assert!((g.means[0] - 0.0).abs() < 0.1, "{g:?}");
        assert!((g.means[1] - 10.0).abs() < 0.1, "{g:?}");
        assert!((g.weights[0] + g.weights[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_threshold_keeps_everything() {
        let xs = mixture(500);
        let g = gmm_fit(&xs).unwrap();
        let (mask, labels) = confidence_filter(&xs, &g, 0.5).unwrap();
        assert!(mask.iter().all(|&m| m));
        assert_eq!(labels[1], 1);
        assert_eq!(labels[0], 0);
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(gmm_fit(&[1.0, 1.0, 1.0]).is_err());
        assert!(confidence_filter(&[0.0], &gmm_fit(&mixture(100)).unwrap(), 1.0).is_err());
    }

    proptest! {
        #[test]
        fn responsibilities_sum_to_one(x in -1e3f64..1e3) {
            let g = GmmModel { weights: [0.3, 0.7], means: [-1.0, 4.0], vars: [0.5, 2.0], iterations: 0, log_likelihood: 0.0 };
            let r = g.responsibilities(x);
            prop_assert!((r[0] + r[1] - 1.0).abs() < 1e-12);
        }

        #[test]
        fn retained_sets_are_nested(x in prop::collection::vec(-5f64..15.0, 20..60), t1 in 0.5f64..0.99, dt in 0.0f64..0.0099) {
            let xs: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + (i % 2) as f64 * 10.0).collect();
            if let Ok(g) = gmm_fit(&xs) {
                let (lo, _) = confidence_filter(&xs, &g, t1).unwrap();
                let (hi, _) = confidence_filter(&xs, &g, t1 + dt).unwrap();
                prop_assert!(hi.iter().zip(&lo).all(|(h, l)| !h || *l));
            }
        }
    }
}
