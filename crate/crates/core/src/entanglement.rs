//! Entangled spin pairs: the M~ nonlinearity, the entangled reset, arrival times,
//! coincidence geometry and counting, and the analytic joint statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin_half::{sample_spin, spin_external_reset, SpinReset};
use crate::types::FieldSpec;
use crate::vec3::Vec3;

/// M~ = sign(M) |M|^n_R.
pub fn tilde_m(m: f64, n_r: u32) -> f64 {
    m.signum() * m.abs().powi(n_r as i32)
}

/// Spin of one member of a pair: sign(s0 + M~) with n_R = 2.
pub fn entangled_spin(s0: f64, m: f64) -> f64 {
    sample_spin(s0, tilde_m(m, 2))
}

/// Spins at both stations for a shared s0 (station II sees -s0) and the spin
/// propensities at each station.
pub fn pair_spins(s0: f64, m_i: f64, m_ii: f64) -> (f64, f64) {
    (entangled_spin(s0, m_i), entangled_spin(-s0, m_ii))
}

/// The reset of an entangled particle: as for a lone spin but with M~ in the energy jump.
pub fn entangled_er(
    spin: f64,
    m: f64,
    n_r: u32,
    propensity: Vec3,
    field: &FieldSpec,
    moment: f64,
) -> Result<SpinReset> {
    spin_external_reset(spin, tilde_m(m, n_r), propensity, field, moment)
}

/// Flight time over `distance` at propagation momentum `m2` after a reset with energy
/// jump `energy * (s - mt0)`: distance / sqrt(m2^2 - energy (s - mt0)).
pub fn expected_arrival(m2: f64, energy: f64, s: f64, mt0: f64, distance: f64) -> Result<f64> {
    let radicand = m2 * m2 - energy * (s - mt0);
    if radicand <= 0.0 {
        return Err(Error::ForbiddenReset {
            alpha_sq: radicand / (m2 * m2),
        });
    }
    Ok(distance / radicand.sqrt())
}

/// First-order delay between stations, T0 energy (s_I - s_II) / (2 m2^2).
pub fn delta_t_correction(t0: f64, energy: f64, m2: f64, s_i: f64, s_ii: f64) -> f64 {
    t0 * energy * (s_i - s_ii) / (2.0 * m2 * m2)
}

/// Removes the spin term from a flight time exactly:
/// distance / sqrt((distance/T)^2 + energy s) depends on the pair only through M~.
pub fn spin_free_flight(flight: f64, distance: f64, energy: f64, s: f64) -> f64 {
    let u = distance / flight;
    distance / (u * u + energy * s).max(f64::MIN_POSITIVE).sqrt()
}

/// Magnitude of the spin propensity shared by both stations in a coincidence,
/// sqrt((1 - lambda_I . lambda_II)/2), and the unit polarization realizing it.
///
/// Station II carries -mu0, so equal propensities need mu0 . lambda_I = -mu0 . lambda_II:
/// mu0 bisects lambda_I and -lambda_II. For parallel axes any direction normal to them
/// works; one is picked deterministically.
pub fn coincidence_m0(lambda_i: Vec3, lambda_ii: Vec3) -> (f64, Vec3) {
    let c = lambda_i.dot(lambda_ii).clamp(-1.0, 1.0);
    let m = ((1.0 - c) / 2.0).sqrt();
    let dir = (lambda_i - lambda_ii).normalized().unwrap_or_else(|| {
        [Vec3::axis(0), Vec3::axis(1), Vec3::axis(2)]
            .into_iter()
            .map(|a| a.cross(lambda_i))
            .max_by(|a, b| a.norm_sq().total_cmp(&b.norm_sq()))
            .and_then(|v| v.normalized())
            .expect("a unit vector is not parallel to every axis")
    });
    (m, dir)
}

/// Joint spin pmf of a pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    pub pp: f64,
    pub pm: f64,
    pub mp: f64,
    pub mm: f64,
}

impl JointPmf {
    /// E[s_I s_II].
    pub fn correlation(&self) -> f64 {
        self.pp + self.mm - self.pm - self.mp
    }

    /// (P(s_I = +1), P(s_II = +1)).
    pub fn marginals(&self) -> (f64, f64) {
        (self.pp + self.pm, self.pp + self.mp)
    }

    pub fn from_counts(counts: [u64; 4]) -> Self {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return JointPmf::default();
        }
        let f = |c: u64| c as f64 / n as f64;
        JointPmf {
            pp: f(counts[0]),
            pm: f(counts[1]),
            mp: f(counts[2]),
            mm: f(counts[3]),
        }
    }
}

/// (1 - s_I s_II cos)/4.
pub fn joint_pmf(lambda_i: Vec3, lambda_ii: Vec3) -> JointPmf {
    let c = lambda_i.dot(lambda_ii).clamp(-1.0, 1.0);
    JointPmf {
        pp: (1.0 - c) / 4.0,
        pm: (1.0 + c) / 4.0,
        mp: (1.0 + c) / 4.0,
        mm: (1.0 - c) / 4.0,
    }
}

/// |E(a,b) - E(a,b') + E(a',b) + E(a',b')|.
pub fn chsh_statistic(e_ab: f64, e_ab2: f64, e_a2b: f64, e_a2b2: f64) -> f64 {
    (e_ab - e_ab2 + e_a2b + e_a2b2).abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Station {
    I,
    II,
}

/// One detection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub station: Station,
    pub pair_id: u64,
    pub spin: f64,
    /// Detection time in global iterations.
    pub time: f64,
    /// Spin propensity at the analyzer entry.
    pub m0: f64,
}

/// How arrival times are adjusted before matching.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeCorrection {
    None,
    /// Station-I times shifted back by the first-order delay for the candidate pair's spins.
    FirstOrder { t0: f64, energy: f64, m2: f64 },
    /// Each station's flight time made spin-free with `spin_free_flight`. Needs the
    /// pulsed-source period to recover flight times from detection times.
    Exact {
        distance: f64,
        energy: f64,
        period: f64,
    },
}

impl TimeCorrection {
    /// Per-station corrected time, independent of any partner.
    pub fn station_time(&self, a: &ArrivalRecord) -> f64 {
        match *self {
            TimeCorrection::Exact {
                distance,
                energy,
                period,
            } => {
                let pulse = (a.time / period).floor() * period;
                pulse + spin_free_flight(a.time - pulse, distance, energy, a.spin)
            }
            _ => a.time,
        }
    }

    /// Shift applied to a station-I time for a candidate partner with spin `s_ii`.
    fn pair_shift(&self, s_i: f64, s_ii: f64) -> f64 {
        match *self {
            TimeCorrection::FirstOrder { t0, energy, m2 } => delta_t_correction(t0, energy, m2, s_i, s_ii),
            _ => 0.0,
        }
    }

    fn max_shift(&self) -> f64 {
        self.pair_shift(1.0, -1.0).abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRecord {
    /// Index into the station-I list.
    pub first: usize,
    /// Index into the station-II list.
    pub second: usize,
    /// |corrected time difference|.
    pub gap: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Coincidences {
    pub pairs: Vec<CoincidenceRecord>,
    pub orphans_i: usize,
    pub orphans_ii: usize,
}

/// Greedy nearest-time matching: every candidate pair with corrected gap <= `window` is
/// ranked by gap (ties by index) and accepted unless one side is already used.
pub fn count_coincidences(
    arrivals_i: &[ArrivalRecord],
    arrivals_ii: &[ArrivalRecord],
    window: f64,
    correction: &TimeCorrection,
) -> Coincidences {
    let ti: Vec<f64> = arrivals_i.iter().map(|a| correction.station_time(a)).collect();
    let tii: Vec<f64> = arrivals_ii.iter().map(|a| correction.station_time(a)).collect();
    let mut order: Vec<usize> = (0..arrivals_ii.len()).collect();
    order.sort_by(|a, b| tii[*a].total_cmp(&tii[*b]).then(a.cmp(b)));
    let sorted: Vec<f64> = order.iter().map(|k| tii[*k]).collect();
    let reach = window + correction.max_shift();

    let mut candidates = Vec::new();
    for (i, a) in arrivals_i.iter().enumerate() {
        let lo = sorted.partition_point(|t| *t < ti[i] - reach);
        for pos in lo..sorted.len() {
            if sorted[pos] > ti[i] + reach {
                break;
            }
            let j = order[pos];
            let shift = correction.pair_shift(a.spin, arrivals_ii[j].spin);
            let gap = (ti[i] - shift - tii[j]).abs();
            if gap <= window {
                candidates.push(CoincidenceRecord { first: i, second: j, gap });
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.gap
            .total_cmp(&b.gap)
            .then(a.first.cmp(&b.first))
            .then(a.second.cmp(&b.second))
    });

    let mut used_i = vec![false; arrivals_i.len()];
    let mut used_ii = vec![false; arrivals_ii.len()];
    let mut pairs = Vec::new();
    for c in candidates {
        if !used_i[c.first] && !used_ii[c.second] {
            used_i[c.first] = true;
            used_ii[c.second] = true;
            pairs.push(c);
        }
    }
    pairs.sort_by_key(|c| (c.first, c.second));
    Coincidences {
        orphans_i: arrivals_i.len() - pairs.len(),
        orphans_ii: arrivals_ii.len() - pairs.len(),
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    use super::*;

    fn dir(theta: f64) -> Vec3 {
        Vec3::new(theta.sin(), 0.0, theta.cos())
    }

    fn arrival(station: Station, time: f64, spin: f64) -> ArrivalRecord {
        ArrivalRecord {
            station,
            pair_id: 0,
            spin,
            time,
            m0: 0.0,
        }
    }

    #[test]
    fn tilde_examples() {
        assert_eq!(tilde_m(0.5, 2), 0.25);
        assert!((tilde_m(-0.7, 2) + 0.49).abs() < 1e-15);
        assert_eq!(tilde_m(-0.3, 1), -0.3);
    }

    #[test]
    fn pair_spin_regions() {
        let m0 = 0.6;
        assert_eq!(pair_spins(0.2, m0, m0), (1.0, 1.0));
        assert_eq!(pair_spins(0.5, m0, m0), (1.0, -1.0));
        for s0 in [-0.9, -0.1, 0.3, 0.8] {
            let (a, b) = pair_spins(s0, 0.0, 0.0);
            assert_eq!(a * b, -1.0);
        }
    }

    #[test]
    fn entangled_reset_example() {
        let field = FieldSpec::new(Vec3::axis(2), 0.04, 0.0, Vec3::axis(2), Default::default()).unwrap();
        let v = Vec3::new(0.0, 0.7, 0.0);
        // s - M~ = 1.5 with s = 1 and M = -sqrt(0.5).
        let r = entangled_er(1.0, -(0.5f64).sqrt(), 2, v, &field, 1.0).unwrap();
        assert!((r.alpha * r.alpha - 0.43 / 0.49).abs() < 1e-12);
        let same = entangled_er(1.0, 1.0, 2, v, &field, 1.0).unwrap();
        assert_eq!(same.alpha, 1.0);
    }

    #[test]
    fn arrival_examples() {
        assert_eq!(expected_arrival(0.7, 0.0, 1.0, -1.0, 210.0).unwrap(), 210.0 / 0.7);
        assert_eq!(expected_arrival(0.7, 0.04, 0.3, 0.3, 210.0).unwrap(), 210.0 / 0.7);
        let t = expected_arrival(0.7, 0.04, 1.0, -1.0, 210.0).unwrap();
        assert!((t - 327.9649).abs() < 1e-3);
        assert!(expected_arrival(0.1, 0.04, 1.0, -1.0, 210.0).is_err());
    }

    #[test]
    fn delta_t_examples() {
        assert_eq!(delta_t_correction(300.0, 0.04, 0.7, 1.0, 1.0), 0.0);
        assert!((delta_t_correction(300.0, 0.04, 0.7, 1.0, -1.0) - 24.4898).abs() < 1e-4);
    }

    #[test]
    fn spin_free_flight_cancels_the_spin() {
        for mt in [-0.8, -0.1, 0.0, 0.45, 1.0] {
            let up = expected_arrival(0.7, 0.04, 1.0, mt, 210.0).unwrap();
            let down = expected_arrival(0.7, 0.04, -1.0, mt, 210.0).unwrap();
            let a = spin_free_flight(up, 210.0, 0.04, 1.0);
            let b = spin_free_flight(down, 210.0, 0.04, -1.0);
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn coincidence_geometry() {
        let (m, _) = coincidence_m0(dir(0.3), dir(0.3));
        assert_eq!(m, 0.0);
        let (m, _) = coincidence_m0(dir(FRAC_PI_2), dir(0.0));
        assert!((m - 0.5f64.sqrt()).abs() < 1e-15);
        let (m, u) = coincidence_m0(dir(PI), dir(0.0));
        assert!((m - 1.0).abs() < 1e-15);
        assert!((u.dot(dir(PI)) - 1.0).abs() < 1e-15);
        for (a, b) in [(0.4, 1.9), (-2.0, 0.0), (3.0, -1.0)] {
            let (m, u) = coincidence_m0(dir(a), dir(b));
            assert!((u.dot(dir(a)) - m).abs() < 1e-12);
            assert!((-u.dot(dir(b)) - m).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_examples() {
        let p = joint_pmf(dir(0.0), dir(0.0));
        assert_eq!((p.pp, p.mm, p.pm, p.mp), (0.0, 0.0, 0.5, 0.5));
        let p = joint_pmf(dir(FRAC_PI_2), dir(0.0));
        for x in [p.pp, p.pm, p.mp, p.mm] {
            assert!((x - 0.25).abs() < 1e-15);
        }
        let p = joint_pmf(dir(PI / 3.0), dir(0.0));
        assert!((p.pp - 0.125).abs() < 1e-15 && (p.pm - 0.375).abs() < 1e-15);
    }

    #[test]
    fn chsh_examples() {
        let e = |a: f64, b: f64| -(a - b).cos();
        let (a, a2, b, b2) = (0.0, FRAC_PI_2, FRAC_PI_4, 3.0 * FRAC_PI_4);
        let s = chsh_statistic(e(a, b), e(a, b2), e(a2, b), e(a2, b2));
        assert!((s - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(chsh_statistic(0.0, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn matching_examples() {
        let a = [arrival(Station::I, 10.0, 1.0)];
        let b = [arrival(Station::II, 10.0, -1.0)];
        let c = count_coincidences(&a, &b, 0.5, &TimeCorrection::None);
        assert_eq!(c.pairs.len(), 1);
        let b = [arrival(Station::II, 10.5 + 1e-9, -1.0)];
        let c = count_coincidences(&a, &b, 0.5, &TimeCorrection::None);
        assert!(c.pairs.is_empty());
        assert_eq!((c.orphans_i, c.orphans_ii), (1, 1));
    }

    #[test]
    fn nearest_candidate_wins() {
        let a = [arrival(Station::I, 10.0, 1.0), arrival(Station::I, 10.3, 1.0)];
        let b = [arrival(Station::II, 10.25, 1.0)];
        let c = count_coincidences(&a, &b, 1.0, &TimeCorrection::None);
        assert_eq!(c.pairs.len(), 1);
        assert_eq!(c.pairs[0].first, 1);
    }

    #[test]
    fn first_order_shift_aligns_opposite_spins() {
        let corr = TimeCorrection::FirstOrder {
            t0: 300.0,
            energy: 0.04,
            m2: 0.7,
        };
        let dt = delta_t_correction(300.0, 0.04, 0.7, 1.0, -1.0);
        let a = [arrival(Station::I, 300.0 + dt, 1.0)];
        let b = [arrival(Station::II, 300.0, -1.0)];
        assert_eq!(count_coincidences(&a, &b, 0.01, &corr).pairs.len(), 1);
        assert!(count_coincidences(&a, &b, 0.01, &TimeCorrection::None).pairs.is_empty());
    }
}
