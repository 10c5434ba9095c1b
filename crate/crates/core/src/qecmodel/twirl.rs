use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relaxation and dephasing times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceParams {
    pub t1: f64,
    pub t2: f64,
}

impl CoherenceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t2 > 0.0) {
            return Err(Error::config("qec.coherence", "T1 and T2 must be positive"));
        }
        if self.t2 > 2.0 * self.t1 {
            return Err(Error::NotCompletelyPositive {
                t2: self.t2,
                two_t1: 2.0 * self.t1,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliChannel {
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
}

impl PauliChannel {
    /// Probability that the error flips a Z-basis bit.
    pub fn bit_flip(&self) -> f64 {
        self.p_x + self.p_y
    }

    pub fn total(&self) -> f64 {
        self.p_x + self.p_y + self.p_z
    }
}

/// Pauli-twirled amplitude and phase damping over an idle of `t` seconds.
pub fn pauli_twirl_idle(t: f64, coherence: &CoherenceParams) -> Result<PauliChannel> {
    coherence.validate()?;
    if !(t >= 0.0) {
        return Err(Error::config("duration", "must be >= 0"));
    }
    let relax = -(-t / coherence.t1).exp_m1();
    let dephase = -(-t / coherence.t2).exp_m1();
    let p_x = relax / 4.0;
    let p_z = (dephase / 2.0 - p_x).max(0.0);
    Ok(PauliChannel { p_x, p_y: p_x, p_z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn limits() {
        let c = CoherenceParams { t1: 1.0, t2: 1.5 };
        let z = pauli_twirl_idle(0.0, &c).unwrap();
        assert_eq!((z.p_x, z.p_y, z.p_z), (0.0, 0.0, 0.0));
        let inf = pauli_twirl_idle(1e6, &c).unwrap();
        for p in [inf.p_x, inf.p_y, inf.p_z] {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_times() {
        let c = CoherenceParams { t1: 0.3, t2: 0.3 };
        let p = pauli_twirl_idle(0.3, &c).unwrap();
        let want = (1.0 - (-1.0f64).exp()) / 4.0;
        for v in [p.p_x, p.p_y, p.p_z] {
            assert!((v - want).abs() < 1e-12);
        }
        assert!((want - 0.1580).abs() < 1e-4);
    }

    #[test]
    fn cp_bound_is_enforced() {
        let err = pauli_twirl_idle(1.0, &CoherenceParams { t1: 1.0, t2: 2.5 });
        assert!(matches!(err, Err(Error::NotCompletelyPositive { .. })));
        assert!(pauli_twirl_idle(1.0, &CoherenceParams { t1: 1.0, t2: 2.0 }).is_ok());
    }

    #[test]
    fn fast_dephasing_makes_p_z_overshoot() {
        // with T2 < T1, p_z peaks before amplitude damping catches up
        let c = CoherenceParams { t1: 1.0, t2: 0.1 };
        let early = pauli_twirl_idle(1.0, &c).unwrap();
        let late = pauli_twirl_idle(10.0, &c).unwrap();
        assert!(late.p_z < early.p_z);
    }

    proptest! {
        #[test]
        fn bounded_and_bit_flip_monotone(t in 0.0f64..10.0, dt in 0.0f64..1.0, t1 in 0.01f64..5.0, r in 0.01f64..2.0) {
            let c = CoherenceParams { t1, t2: t1 * r };
            let a = pauli_twirl_idle(t, &c).unwrap();
            let b = pauli_twirl_idle(t + dt, &c).unwrap();
            prop_assert!(b.p_x >= a.p_x && b.bit_flip() >= a.bit_flip());
            prop_assert!(b.total() <= 0.75 + 1e-12);
        }

        #[test]
        fn all_components_monotone_when_t2_at_least_t1(t in 0.0f64..10.0, dt in 0.0f64..1.0, t1 in 0.01f64..5.0, r in 1.0f64..2.0) {
            let c = CoherenceParams { t1, t2: t1 * r };
            let a = pauli_twirl_idle(t, &c).unwrap();
            let b = pauli_twirl_idle(t + dt, &c).unwrap();
            prop_assert!(b.p_z >= a.p_z - 1e-15);
        }
    }
}
