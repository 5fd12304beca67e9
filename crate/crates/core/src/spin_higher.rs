//! Spin S > 1/2: the second polarization tau, the first two central moments, sampling on
//! the (2S+1)-point grid, the higher-spin reset and the spin-1 cascade pmf.

use crate::error::{Error, Result};
use crate::types::{SpinNumber, SpinVars};
use crate::vec3::Vec3;

const TOLERANCE: f64 = 1e-12;

/// State of a particle with spin S > 1/2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HigherSpinState {
    pub mu: Vec3,
    pub tau: Vec3,
    pub source_spin: f64,
    pub spin: f64,
    pub number: SpinNumber,
}

impl From<SpinVars> for HigherSpinState {
    fn from(v: SpinVars) -> Self {
        HigherSpinState {
            mu: v.mu,
            tau: v.tau,
            source_spin: v.source_spin,
            spin: v.spin,
            number: v.number,
        }
    }
}

/// (M, V) with M = mu . lambda, T = tau . lambda and V = (|tau|^2 - T^2)/2.
pub fn spin_moments(mu: Vec3, tau: Vec3, lambda: Vec3) -> Result<(f64, f64)> {
    let m = mu.dot(lambda);
    let t = tau.dot(lambda);
    let v = (tau.norm_sq() - t * t) / 2.0;
    if v < -TOLERANCE {
        return Err(Error::InconsistentState(format!("negative spin variance {v}")));
    }
    Ok((m, v.max(0.0)))
}

/// Spin-1 pmf from its moments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spin1Pmf {
    pub plus: f64,
    pub zero: f64,
    pub minus: f64,
}

impl Spin1Pmf {
    /// Probabilities in grid order (-1, 0, +1).
    pub fn ascending(&self) -> [f64; 3] {
        [self.minus, self.zero, self.plus]
    }

    /// Probability of grid value `s`.
    pub fn get(&self, s: f64) -> f64 {
        if s > 0.5 {
            self.plus
        } else if s < -0.5 {
            self.minus
        } else {
            self.zero
        }
    }
}

/// P(+-1) = (V + M^2 +- M)/2, P(0) = 1 - V - M^2.
pub fn spin1_pmf(m: f64, v: f64) -> Result<Spin1Pmf> {
    let q = v + m * m;
    let pmf = Spin1Pmf {
        plus: (q + m) / 2.0,
        zero: 1.0 - q,
        minus: (q - m) / 2.0,
    };
    let ok = |p: f64| (-TOLERANCE..=1.0 + TOLERANCE).contains(&p);
    if ok(pmf.plus) && ok(pmf.zero) && ok(pmf.minus) {
        Ok(pmf)
    } else {
        Err(Error::InvalidMoments { m, v })
    }
}

/// The same pmf written as a polynomial in s: (1 - s^2) + (s/2) M + (3 s^2/2 - 1)(V + M^2).
pub fn spin1_probability(s: f64, m: f64, v: f64) -> f64 {
    (1.0 - s * s) + s / 2.0 * m + (1.5 * s * s - 1.0) * (v + m * m)
}

/// s = -1 + (1/S) * #{k in 1..=2S : s0 >= s~_k}, thresholds s~_k = -1 + 2 (mass below grid
/// point k). With s0 ~ Uniform[-1, 1] this draws exactly from `pmf` (given in ascending
/// grid order).
pub fn sample_spin_general(number: SpinNumber, s0: f64, pmf: &[f64]) -> Result<f64> {
    if pmf.len() != number.grid_len() {
        return Err(Error::BinMismatch {
            left: pmf.len(),
            right: number.grid_len(),
        });
    }
    let mut below = 0.0;
    let mut count = 0u32;
    for p in &pmf[..pmf.len() - 1] {
        below += p;
        if s0 >= -1.0 + 2.0 * below {
            count += 1;
        }
    }
    Ok(-1.0 + 2.0 * f64::from(count) / f64::from(number.twice()))
}

/// mu <- s lambda; for S > 1/2 also tau <- lambda sqrt((S+1)/S - s^2), leaving V = 0.
pub fn higher_er(state: &mut HigherSpinState, lambda: Vec3, s: f64) {
    state.mu = lambda * s;
    state.spin = s;
    if state.number != SpinNumber::HALF {
        let r = state.number.budget() - s * s;
        debug_assert!(r >= -TOLERANCE, "grid spin outside the polarization budget");
        state.tau = lambda * r.max(0.0).sqrt();
    }
}

/// Spin-1 pmf behind a second analyzer at cosine `y` to the first, given exit spin `s1`.
/// Goes through the moments at the second entry: M = s1 Y, V = (2 - s1^2)(1 - Y^2)/2.
pub fn spin1_cascade_pmf(y: f64, s1: f64) -> Result<Spin1Pmf> {
    let y = y.clamp(-1.0, 1.0);
    let m = s1 * y;
    let v = (SpinNumber::ONE.budget() - s1 * s1) * (1.0 - y * y) / 2.0;
    spin1_pmf(m, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_examples() {
        let z = Vec3::axis(2);
        let (_, v) = spin_moments(Vec3::ZERO, z * 1.3, z).unwrap();
        assert_eq!(v, 0.0);
        let (m, v) = spin_moments(Vec3::ZERO, Vec3::new(2f64.sqrt(), 0.0, 0.0), z).unwrap();
        assert_eq!(m, 0.0);
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(spin1_pmf(1.0, 0.0).unwrap().ascending(), [0.0, 0.0, 1.0]);
        assert_eq!(spin1_pmf(0.0, 1.0).unwrap().ascending(), [0.5, 0.0, 0.5]);
        assert_eq!(spin1_pmf(0.5, 0.25).unwrap().ascending(), [0.0, 0.5, 0.5]);
        assert!(spin1_pmf(0.9, 0.5).is_err());
    }

    #[test]
    fn sampler_examples() {
        for s0 in [-0.95, -0.4, 0.0, 0.3, 0.99] {
            for m in [-0.7, 0.0, 0.4] {
                let pmf = [(1.0 - m) / 2.0, (1.0 + m) / 2.0];
                let s = sample_spin_general(SpinNumber::HALF, s0, &pmf).unwrap();
                assert_eq!(s, crate::spin_half::sample_spin(s0, m));
            }
            assert_eq!(sample_spin_general(SpinNumber::ONE, s0, &[0.0, 0.0, 1.0]).unwrap(), 1.0);
        }
        assert!(sample_spin_general(SpinNumber::ONE, 0.0, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn reset_examples() {
        let mut st = HigherSpinState {
            mu: Vec3::new(0.3, 0.0, 0.1),
            tau: Vec3::new(0.0, 1.2, 0.4),
            source_spin: 0.0,
            spin: 0.0,
            number: SpinNumber::ONE,
        };
        let z = Vec3::axis(2);
        higher_er(&mut st, z, 0.0);
        assert!((st.tau - z * 2f64.sqrt()).norm() < 1e-15);
        let (m, v) = spin_moments(st.mu, st.tau, z).unwrap();
        assert_eq!((m, v), (0.0, 0.0));
    }

    #[test]
    fn cascade_examples() {
        assert_eq!(spin1_cascade_pmf(1.0, 1.0).unwrap().ascending(), [0.0, 0.0, 1.0]);
        assert_eq!(spin1_cascade_pmf(0.0, 0.0).unwrap().ascending(), [0.5, 0.0, 0.5]);
        let p = spin1_cascade_pmf(0.5, 0.0).unwrap();
        assert!((p.zero - 0.25).abs() < 1e-15);
        assert!((p.plus - 0.375).abs() < 1e-15 && (p.minus - 0.375).abs() < 1e-15);
    }

    /// The closed form with the two squared spins added in its first term agrees with
    /// the moment route; with them subtracted it is not even symmetric.
    #[test]
    fn closed_form_needs_the_plus_sign() {
        let closed = |s1: f64, s2: f64, y: f64, sign: f64| {
            let (a, b) = (s1 * s1, s2 * s2);
            ((b + sign * a) / 2.0 - 0.75 * a * b)
                + s1 * s2 / 2.0 * y
                + (1.0 - 1.5 * (a + b) + 2.25 * a * b) * y * y
        };
        for y in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            for s1 in [-1.0, 0.0, 1.0] {
                let pmf = spin1_cascade_pmf(y, s1).unwrap();
                for s2 in [-1.0, 0.0, 1.0] {
                    assert!((closed(s1, s2, y, 1.0) - pmf.get(s2)).abs() < 1e-14);
                }
            }
        }
        assert!((closed(1.0, 0.0, 0.0, -1.0) - closed(0.0, 1.0, 0.0, -1.0)).abs() > 0.5);
    }
}
