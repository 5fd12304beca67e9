use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use lrm::emission::Plane;
use lrm::entanglement::{
    chsh_statistic, count_coincidences, delta_t_correction, expected_arrival, joint_pmf, tilde_m, ArrivalRecord, Coincidences, Station,
    TimeCorrection,
};
use lrm::expected::far_field_momentum;
use lrm::oracle::gaussian_source;
use lrm::{RngStream, Vec3};
use proptest::prelude::*;
use rand::Rng;

fn record(station: Station, pair_id: u64, time: f64, spin: f64) -> ArrivalRecord {
    ArrivalRecord {
        station,
        pair_id,
        spin,
        time,
        m0: 0.0,
    }
}

fn arrivals(station: Station) -> impl Strategy<Value = Vec<ArrivalRecord>> {
    prop::collection::vec((0.0f64..200.0, any::<bool>()), 0..40).prop_map(move |v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (t, up))| record(station, i as u64, t, if up { 1.0 } else { -1.0 }))
            .collect()
    })
}

fn relabel(a: &[ArrivalRecord], station: Station) -> Vec<ArrivalRecord> {
    a.iter().map(|r| ArrivalRecord { station, ..*r }).collect()
}

fn pair_set(c: &Coincidences, swapped: bool) -> BTreeSet<(usize, usize)> {
    c.pairs
        .iter()
        .map(|p| if swapped { (p.second, p.first) } else { (p.first, p.second) })
        .collect()
}

proptest! {
    #[test]
    fn analytic_marginals_are_one_half(a in -PI..PI, b in -PI..PI) {
        let plane = Plane::default();
        let j = joint_pmf(plane.direction(a), plane.direction(b));
        let (mi, mii) = j.marginals();
        prop_assert!((mi - 0.5).abs() < 1e-15 && (mii - 0.5).abs() < 1e-15);
        prop_assert!((j.pp + j.pm + j.mp + j.mm - 1.0).abs() < 1e-15);
        prop_assert!((j.correlation() + (a - b).cos()).abs() < 1e-12);
    }

    #[test]
    fn matching_is_symmetric_in_the_stations(
        ai in arrivals(Station::I),
        aii in arrivals(Station::II),
        window in 0.0f64..3.0,
        first_order in any::<bool>(),
    ) {
        let corr = if first_order {
            TimeCorrection::FirstOrder { t0: 300.0, energy: 0.04, m2: 0.7 }
        } else {
            TimeCorrection::None
        };
        let forward = count_coincidences(&ai, &aii, window, &corr);
        let backward = count_coincidences(&relabel(&aii, Station::I), &relabel(&ai, Station::II), window, &corr);
        prop_assert_eq!(pair_set(&forward, false), pair_set(&backward, true));
    }

    #[test]
    fn matching_uses_each_arrival_once_within_the_window(
        ai in arrivals(Station::I),
        aii in arrivals(Station::II),
        window in 0.0f64..3.0,
    ) {
        let c = count_coincidences(&ai, &aii, window, &TimeCorrection::None);
        let firsts: BTreeSet<usize> = c.pairs.iter().map(|p| p.first).collect();
        let seconds: BTreeSet<usize> = c.pairs.iter().map(|p| p.second).collect();
        prop_assert_eq!(firsts.len(), c.pairs.len());
        prop_assert_eq!(seconds.len(), c.pairs.len());
        for p in &c.pairs {
            prop_assert!(p.gap <= window);
            prop_assert!(((ai[p.first].time - aii[p.second].time).abs() - p.gap).abs() < 1e-12);
        }
        prop_assert_eq!(c.orphans_i + c.pairs.len(), ai.len());
        prop_assert_eq!(c.orphans_ii + c.pairs.len(), aii.len());
    }

    #[test]
    fn exact_correction_removes_the_spin(u in 0.4f64..1.0, mt in -1.0f64..1.0, pulse in 0u32..50, up_i in any::<bool>(), up_ii in any::<bool>()) {
        let (distance, energy, period) = (210.0, 0.04, 1000.0);
        let t0 = f64::from(pulse) * period;
        let spin = |up: bool| if up { 1.0 } else { -1.0 };
        let a = record(Station::I, 0, t0 + expected_arrival(u, energy, spin(up_i), mt, distance).unwrap(), spin(up_i));
        let b = record(Station::II, 0, t0 + expected_arrival(u, energy, spin(up_ii), mt, distance).unwrap(), spin(up_ii));
        let corr = TimeCorrection::Exact { distance, energy, period };
        prop_assert!((corr.station_time(&a) - corr.station_time(&b)).abs() < 1e-9);
    }

    #[test]
    fn tilde_m_keeps_sign_and_order(a in -1.0f64..=1.0, b in -1.0f64..=1.0) {
        prop_assert_eq!(tilde_m(a, 2).signum(), a.signum());
        if a <= b {
            prop_assert!(tilde_m(a, 2) <= tilde_m(b, 2));
        }
        prop_assert!(tilde_m(a, 2).abs() <= a.abs());
    }
}

/// Same-M0 pairs from the far-field momentum spread of the Bell source, with the default
/// per-station correction: at least 99% must fall inside the window.
#[test]
fn corrected_same_m0_pairs_fall_inside_the_window() {
    let (distance, energy, m2, period): (f64, f64, f64, f64) = (210.0, 0.04, 0.7, 1000.0);
    let window = 0.01;
    let corr = TimeCorrection::Exact { distance, energy, period };
    let momentum = gaussian_source(17, 1, Vec3::new(0.0, m2, 0.0)).unwrap();
    let mut rng = RngStream::new(4, 0, 0).rng();
    let (mut caught, mut tried) = (0, 0);
    for i in 0..20_000u64 {
        let u = far_field_momentum(rng.random_range(-1.0..=1.0), &momentum, 1).unwrap();
        let mt = tilde_m(rng.random_range(-1.0..=1.0), 2);
        let s_i: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let s_ii: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let (Ok(ti), Ok(tii)) = (
            expected_arrival(u, energy, s_i, mt, distance),
            expected_arrival(u, energy, s_ii, mt, distance),
        ) else {
            continue;
        };
        tried += 1;
        let start = i as f64 * period;
        let a = [record(Station::I, i, start + ti, s_i)];
        let b = [record(Station::II, i, start + tii, s_ii)];
        caught += count_coincidences(&a, &b, window, &corr).pairs.len();
    }
    let share = caught as f64 / tried as f64;
    assert!(share >= 0.99, "{share}");
}

/// At the nominal momentum the first-order shift matches the exact delay up to a
/// second-order remainder in mu B / m2^2.
#[test]
fn first_order_shift_is_a_taylor_approximation() {
    let (distance, m2): (f64, f64) = (210.0, 0.7);
    let t0 = distance / m2;
    for energy in [0.005, 0.01, 0.02, 0.04] {
        let eps = energy / (m2 * m2);
        for mt in [-0.9, -0.2, 0.0, 0.5, 1.0] {
            for (s_i, s_ii) in [(1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
                let ti = expected_arrival(m2, energy, s_i, mt, distance).unwrap();
                let tii = expected_arrival(m2, energy, s_ii, mt, distance).unwrap();
                let dt = delta_t_correction(t0, energy, m2, s_i, s_ii);
                let rest = ((ti - tii) - dt).abs();
                assert!(rest <= 4.0 * eps * eps * t0, "energy {energy}, M {mt}: {rest}");
            }
        }
    }
}

#[test]
fn optimal_chsh_settings_reach_tsirelson() {
    let e = |a: f64, b: f64| -(a - b).cos();
    let (a, a2, b, b2) = (0.0, FRAC_PI_2, FRAC_PI_4, 3.0 * FRAC_PI_4);
    let s = chsh_statistic(e(a, b), e(a, b2), e(a2, b), e(a2, b2));
    assert!((s - 2.0 * 2f64.sqrt()).abs() < 1e-12);
}
