use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Latency budget of one logical operation, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingParams {
    pub t_gate: f64,
    pub t_readout: f64,
    pub t_classification: f64,
    pub t_denoise: f64,
    pub t_reset: f64,
    pub d_rounds: usize,
    pub n_tgates: usize,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            t_gate: 5e-6,
            t_readout: 1.5e-3,
            t_classification: 4e-4,
            t_denoise: 1.6e-3,
            t_reset: 0.0,
            d_rounds: 100,
            n_tgates: 1,
        }
    }
}

impl TimingParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("timing.t_gate", self.t_gate),
            ("timing.t_readout", self.t_readout),
            ("timing.t_classification", self.t_classification),
            ("timing.t_denoise", self.t_denoise),
            ("timing.t_reset", self.t_reset),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be finite and >= 0"));
            }
        }
        if self.d_rounds == 0 {
            return Err(Error::config("timing.d_rounds", "must be >= 1"));
        }
        Ok(())
    }
}

/// Syndrome generation, readout and reset.
pub fn qec_cycle_time(t: &TimingParams) -> f64 {
    t.t_gate + t.t_readout + t.t_reset
}

pub fn exec_time_estimate(t: &TimingParams) -> f64 {
    t.n_tgates as f64 * t.d_rounds as f64 * qec_cycle_time(t)
}

/// `d` rounds with classification serialised after every readout. Reset is
/// folded into `t_gate` here.
pub fn t_unpipelined(t: &TimingParams) -> f64 {
    t.d_rounds as f64 * (t.t_gate + t.t_readout + t.t_classification)
}

/// Denoising and classification of round k overlap acquisition of round
/// k+1, so only the last round's processing is exposed.
pub fn t_pipelined(t: &TimingParams) -> f64 {
    t.d_rounds as f64 * (t.t_readout + t.t_gate) + (t.t_denoise + t.t_classification)
}

/// Closed form of `t_unpipelined - t_pipelined`.
pub fn pipeline_gap(t: &TimingParams) -> f64 {
    (t.d_rounds as f64 - 1.0) * t.t_classification - t.t_denoise
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cycle_and_execution_time() {
        let t = TimingParams {
            t_gate: 1e-3,
            t_readout: 10e-3,
            t_reset: 1e-3,
            d_rounds: 11,
            n_tgates: 100,
            ..TimingParams::default()
        };
        assert!((qec_cycle_time(&t) - 12e-3).abs() < 1e-15);
        assert!((exec_time_estimate(&t) - 13.2).abs() < 1e-12);
        let zero = TimingParams {
            t_gate: 0.0,
            t_readout: 0.0,
            t_reset: 0.0,
            ..t
        };
        assert_eq!(qec_cycle_time(&zero), 0.0);
        let doubled = TimingParams { d_rounds: 22, ..t };
        assert!((exec_time_estimate(&doubled) - 2.0 * exec_time_estimate(&t)).abs() < 1e-12);
    }

    #[test]
    fn readout_dominates_a_neutral_atom_cycle() {
        let t = TimingParams {
            t_gate: 0.4e-6,
            t_readout: 10e-3,
            t_reset: 0.0,
            ..TimingParams::default()
        };
        let frac = t.t_readout / qec_cycle_time(&t);
        assert!((0.75..=0.99999).contains(&frac), "{frac}");
    }

    #[test]
    fn single_round_without_denoise_has_no_gap() {
        let t = TimingParams {
            d_rounds: 1,
            t_denoise: 0.0,
            ..TimingParams::default()
        };
        assert_eq!(t_pipelined(&t), t_unpipelined(&t));
        assert_eq!(pipeline_gap(&t), 0.0);
    }

    proptest! {
        #[test]
        fn gap_identity(g in 0.0f64..1e-2, r in 0.0f64..1e-1, c in 0.0f64..1e-2, dn in 0.0f64..1e-2, d in 1usize..500) {
            let t = TimingParams { t_gate: g, t_readout: r, t_classification: c, t_denoise: dn, t_reset: 0.0, d_rounds: d, n_tgates: 1 };
            let lhs = t_unpipelined(&t) - t_pipelined(&t);
            prop_assert!((lhs - pipeline_gap(&t)).abs() <= 1e-12 * (1.0 + t_unpipelined(&t)));
        }
    }
}
