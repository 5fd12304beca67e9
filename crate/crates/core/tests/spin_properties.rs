use lrm::apparatus::SternGerlach;
use lrm::emission::{prepare_emission, round_spin, source_spin, spin_vars, uniform_direction, EmissionConfig, MomentumDist};
use lrm::spin_half::{
    analytic_spin_pmf, cascade_pmf, evolve_polarization, polarization_from_spinor, sample_spin, spin_external_reset,
    spinor_from_polarization,
};
use lrm::spin_higher::{spin1_cascade_pmf, spin1_pmf};
use lrm::types::{FieldSpec, PairMode, SourceEnsemble, SpinNumber};
use lrm::{RngStream, Vec3};
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0f64..1.0)
        .prop_filter_map("non-zero", |a| Vec3(a).normalized())
}

fn sg(direction: Vec3) -> SternGerlach {
    SternGerlach::new(FieldSpec::stern_gerlach(direction, 0.04, 0.01).unwrap(), 1.0)
}

proptest! {
    #[test]
    fn precession_keeps_m_and_drifts_the_norm_by_eta_squared(
        mu in prop::array::uniform3(-2.0f64..2.0),
        lambda in unit(),
        eta in 0.0f64..0.2,
    ) {
        let mu = Vec3(mu);
        let field = FieldSpec::homogeneous(lambda, 1.0).unwrap();
        let next = evolve_polarization(mu, &field, eta);
        prop_assert!((next.dot(field.direction) - mu.dot(field.direction)).abs() < 1e-12);
        let drift = next.norm_sq() - mu.norm_sq();
        prop_assert!((drift - eta * eta * mu.cross(field.direction).norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn spin_after_a_reset_is_certain(mu in unit(), lambda in unit(), s0 in -1.0f64..=1.0, s0_next in -1.0f64..=1.0) {
        let field = FieldSpec::stern_gerlach(lambda, 0.04, 0.01).unwrap();
        let s = sample_spin(s0, mu.dot(field.direction));
        let r = spin_external_reset(s, mu.dot(field.direction), Vec3::new(0.0, 0.7, 0.0), &field, 1.0).unwrap();
        prop_assert_eq!(sample_spin(s0_next, r.mu.dot(field.direction)), s);
    }

    #[test]
    fn analyzer_passes_never_flip_after_a_reset(seed in any::<u64>(), lambda in unit(), steps in 2u32..40) {
        let mut rng = RngStream::new(seed, 0, 0).rng();
        for number in [SpinNumber::HALF, SpinNumber::ONE] {
            let mut a = sg(lambda);
            a.renormalize = number == SpinNumber::ONE;
            let mut sv = spin_vars(number, source_spin(&mut rng), uniform_direction(&mut rng));
            let t = a.traverse(&mut sv, Vec3::new(0.0, 0.7, 0.0), steps, &mut rng).unwrap();
            prop_assert_eq!(t.flips_after_reset, 0);
        }
    }

    #[test]
    fn cascade_depends_only_on_the_cosine(l1 in unit(), l2 in unit(), up in any::<bool>()) {
        let s1 = if up { 1.0 } else { -1.0 };
        let a = cascade_pmf(l1, l2, s1);
        let b = cascade_pmf(l2, l1, s1);
        prop_assert!((a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-15);
        prop_assert!((a.0 + a.1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spinor_round_trip(mu in unit()) {
        let chi = spinor_from_polarization(mu).unwrap();
        let back = polarization_from_spinor(chi, false).unwrap();
        prop_assert!((back - mu).norm() < 1e-12);
        let again = spinor_from_polarization(back).unwrap();
        let overlap = chi[0].conj() * again[0] + chi[1].conj() * again[1];
        prop_assert!((overlap.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spin1_pmf_normalizes_and_returns_its_moments(m in -1.0f64..=1.0, x in 0.0f64..=1.0) {
        // Valid region: |M| - M^2 <= V <= 1 - M^2.
        let lo = m.abs() - m * m;
        let v = lo + x * (1.0 - m * m - lo);
        let p = spin1_pmf(m, v).unwrap();
        prop_assert!((p.plus + p.zero + p.minus - 1.0).abs() < 1e-12);
        prop_assert!((p.plus - p.minus - m).abs() < 1e-12);
        prop_assert!((p.plus + p.minus - m * m - v).abs() < 1e-12);
    }

    #[test]
    fn spin1_cascade_is_symmetric(y in -1.0f64..=1.0) {
        for s1 in SpinNumber::ONE.grid() {
            for s2 in SpinNumber::ONE.grid() {
                let a = spin1_cascade_pmf(y, s1).unwrap().get(s2);
                let b = spin1_cascade_pmf(y, s2).unwrap().get(s1);
                prop_assert!((a - b).abs() < 1e-12, "Y={y} s1={s1} s2={s2}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn entangled_partners_are_exact_negatives(seed in any::<u64>(), twice in 1u32..=2) {
        let ens = SourceEnsemble::point([0; 3]).with_pair_mode(PairMode::Entangled);
        let cfg = EmissionConfig {
            spin: Some(SpinNumber::from_twice(twice).unwrap()),
            momentum: MomentumDist::Uniform { axes: [true, true, false] },
            ..EmissionConfig::default()
        };
        let e = prepare_emission(&ens, &cfg, &mut RngStream::new(seed, 0, 0).rng()).unwrap();
        let (a, b) = (e.first, e.second.unwrap());
        prop_assert_eq!(b.source_momentum, -a.source_momentum);
        let (sa, sb) = (a.spin.unwrap(), b.spin.unwrap());
        prop_assert_eq!(sb.source_spin, -sa.source_spin);
        prop_assert_eq!(sb.spin, -sa.spin);
        prop_assert_eq!(sb.mu, -sa.mu);
        prop_assert_eq!(sb.tau, -sa.tau);
    }

    #[test]
    fn round_spin_lands_on_the_grid_and_is_idempotent(s0 in -1.0f64..=1.0, twice in 1u32..=6) {
        let number = SpinNumber::from_twice(twice).unwrap();
        let r = round_spin(s0, number);
        prop_assert!(number.grid_index(r).is_some());
        prop_assert_eq!(round_spin(r, number), r);
    }
}

#[test]
fn round_spin_fixes_every_grid_point() {
    for twice in 1..=6 {
        let number = SpinNumber::from_twice(twice).unwrap();
        for g in number.grid() {
            assert!((round_spin(g, number) - g).abs() < 1e-15);
        }
    }
}

fn ks_statistic(mut draws: Vec<f64>) -> f64 {
    let n = draws.len() as f64;
    draws.sort_by(f64::total_cmp);
    draws
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let cdf = (x + 1.0) / 2.0;
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn source_spin_passes_kolmogorov_smirnov() {
    // Ten independent streams of 1e5 draws each. Under uniformity each exceeds the 1%
    // critical value with probability 0.01, so two or more exceedances has p ~ 0.004.
    let n = 100_000;
    let critical = 1.6276 / (n as f64).sqrt();
    let stats: Vec<f64> = (0..10)
        .map(|r| {
            let mut rng = RngStream::new(2024, r, 0).rng();
            ks_statistic((0..n).map(|_| source_spin(&mut rng)).collect())
        })
        .collect();
    let over = stats.iter().filter(|d| **d >= critical).count();
    assert!(over <= 1, "{over} of 10 streams over {critical}: {stats:?}");
}

#[test]
fn analyzer_frequencies_match_the_analytic_pmf() {
    let n = 100_000;
    let lambda = Vec3::axis(2);
    let a = sg(lambda);
    for k in 0..12 {
        let theta = std::f64::consts::PI * k as f64 / 12.0;
        let mu0 = Vec3::new(theta.sin(), 0.0, theta.cos());
        let mut rng = RngStream::new(77, k, 0).rng();
        let up = (0..n)
            .filter(|_| {
                let mut sv = spin_vars(SpinNumber::HALF, source_spin(&mut rng), mu0);
                a.traverse(&mut sv, Vec3::new(0.0, 0.7, 0.0), 5, &mut rng).unwrap().exit_spin > 0.0
            })
            .count();
        let (p, _) = analytic_spin_pmf(mu0, lambda);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let f = up as f64 / n as f64;
        assert!((f - p).abs() <= 3.0 * sigma + 1e-12, "theta={theta}: {f} vs {p}");
    }
}
