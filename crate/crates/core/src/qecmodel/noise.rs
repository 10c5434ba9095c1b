use serde::{Deserialize, Serialize};

use super::{pauli_twirl_idle, CoherenceParams, PauliChannel};
use crate::{Error, Result};

/// `a * exp(-b t) + c`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpDecayFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rss: f64,
}

impl ExpDecayFit {
    pub fn eval(&self, t: f64) -> f64 {
        (self.a * (-self.b * t).exp() + self.c).clamp(0.0, 1.0)
    }

    /// Least squares: for each decay rate on a log grid (refined by golden
    /// section) the amplitude and offset are linear, so solve them exactly.
    pub fn fit(ts: &[f64], ys: &[f64]) -> Result<Self> {
        if ts.len() != ys.len() || ts.len() < 3 {
            return Err(Error::config(
                "noise.fit",
                "need at least three (duration, p) points",
            ));
        }
        let span = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - ts.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(span > 0.0) {
            return Err(Error::config("noise.fit", "durations must differ"));
        }
        let solve = |b: f64| -> (f64, f64, f64) {
            let n = ts.len() as f64;
            let e: Vec<f64> = ts.iter().map(|t| (-b * t).exp()).collect();
            let (se, sy) = (e.iter().sum::<f64>(), ys.iter().sum::<f64>());
            let see = e.iter().map(|v| v * v).sum::<f64>();
            let sey = e.iter().zip(ys).map(|(a, b)| a * b).sum::<f64>();
            let det = n * see - se * se;
            let (a, c) = if det.abs() < 1e-300 {
                (0.0, sy / n)
            } else {
                ((n * sey - se * sy) / det, (see * sy - se * sey) / det)
            };
            let rss = e
                .iter()
                .zip(ys)
                .map(|(ei, y)| (a * ei + c - y).powi(2))
                .sum();
            (a, c, rss)
        };
        let (lo, hi) = ((1e-3 / span).ln(), (1e3 / span).ln());
        let grid: Vec<f64> = (0..=400)
            .map(|i| lo + (hi - lo) * i as f64 / 400.0)
            .collect();
        let k = (0..grid.len())
            .min_by(|&i, &j| solve(grid[i].exp()).2.total_cmp(&solve(grid[j].exp()).2))
            .unwrap();
        let (mut x0, mut x1) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let (m0, m1) = (x1 - g * (x1 - x0), x0 + g * (x1 - x0));
            if solve(m0.exp()).2 < solve(m1.exp()).2 {
                x1 = m1;
            } else {
                x0 = m0;
            }
        }
        let b = (0.5 * (x0 + x1)).exp();
        let (a, c, rss) = solve(b);
        Ok(Self { a, b, c, rss })
    }
}

/// Measurement and idle error per readout duration (seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCurves {
    pub durations: Vec<f64>,
    pub p_meas: Vec<f64>,
    pub idle: Vec<PauliChannel>,
}

impl NoiseCurves {
    /// Idle channel evaluated over `duration + overhead` per round.
    pub fn new(
        durations: &[f64],
        p_meas: &[f64],
        coherence: &CoherenceParams,
        overhead_s: f64,
    ) -> Result<Self> {
        if durations.len() != p_meas.len() || durations.is_empty() {
            return Err(Error::config("noise", "need one p_meas per duration"));
        }
        let idle = durations
            .iter()
            .map(|&t| pauli_twirl_idle(t + overhead_s, coherence))
            .collect::<Result<Vec<_>>>()?;
        let out = Self {
            durations: durations.to_vec(),
            p_meas: p_meas.to_vec(),
            idle,
        };
        out.validate()?;
        Ok(out)
    }

    /// Measurement error from a fitted curve instead of measured points.
    pub fn from_fit(
        durations: &[f64],
        fit: &ExpDecayFit,
        coherence: &CoherenceParams,
        overhead_s: f64,
    ) -> Result<Self> {
        let p: Vec<f64> = durations.iter().map(|&t| fit.eval(t)).collect();
        Self::new(durations, &p, coherence, overhead_s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_meas.len() != self.durations.len() || self.idle.len() != self.durations.len() {
            return Err(Error::config("noise", "curves must cover every duration"));
        }
        for &p in &self.p_meas {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Probability {
                    name: "p_meas".into(),
                    value: p,
                });
            }
        }
        for c in &self.idle {
            for p in [c.p_x, c.p_y, c.p_z] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Probability {
                        name: "idle".into(),
                        value: p,
                    });
                }
            }
            if c.total() > 1.0 {
                return Err(Error::Probability {
                    name: "idle total".into(),
                    value: c.total(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_curve() {
        let ts = [1.0f64, 2.0, 3.0, 5.0, 8.0, 12.0];
        let ys: Vec<f64> = ts.iter().map(|t| 0.2 * (-0.4 * t).exp() + 0.01).collect();
        let f = ExpDecayFit::fit(&ts, &ys).unwrap();
        assert!(
            (f.a - 0.2).abs() < 1e-6 && (f.b - 0.4).abs() < 1e-6 && (f.c - 0.01).abs() < 1e-6,
            "{f:?}"
        );
    }

    #[test]
    fn rejects_bad_probabilities() {
        let c = CoherenceParams { t1: 1.0, t2: 1.0 };
        assert!(NoiseCurves::new(&[1e-3], &[1.2], &c, 0.0).is_err());
        assert!(NoiseCurves::new(&[1e-3, 2e-3], &[0.1], &c, 0.0).is_err());
        assert!(NoiseCurves::new(&[1e-3], &[0.1], &c, 0.0).is_ok());
    }
}
