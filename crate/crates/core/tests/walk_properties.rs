use std::collections::BTreeMap;

use lrm::emission::{EmissionConfig, MomentumDist};
use lrm::types::{ParticleBoson, ParticleState, PairMode, Source, SourceEnsemble};
use lrm::walk::{
    decay_particle_bosons, momentum_pmf, quantum_reset, read_snapshot, run_walk_ensemble, step, write_snapshot,
    Lattice, NoField, NodeState, UniformForce, WalkConfig, WalkScenario,
};
use lrm::{Region, RngStream, Vec3};
use proptest::prelude::*;

fn two_sources(sep: i64) -> SourceEnsemble {
    let at = |x: i64| Source {
        position: [x, 0, 0],
        probability: 0.5,
        phase: Vec3::ZERO,
    };
    SourceEnsemble::new(vec![at(-sep / 2), at(sep - sep / 2)], PairMode::Single).unwrap()
}

fn scenario(sep: i64, steps: u64, training: u64) -> WalkScenario<NoField> {
    WalkScenario {
        ensemble: two_sources(sep),
        emission: EmissionConfig {
            momentum: MomentumDist::Uniform { axes: [true, false, false] },
            rho: Vec3::axis(0),
            ..EmissionConfig::default()
        },
        field: NoField,
        config: WalkConfig::one_dimensional(0),
        steps,
        training,
    }
}

proptest! {
    #[test]
    fn pmf_is_a_distribution_with_mean_v(v in -1.0f64..=1.0) {
        let p = momentum_pmf(v).unwrap();
        for q in [p.minus, p.zero, p.plus] {
            prop_assert!((0.0..=1.0).contains(&q));
        }
        prop_assert!((p.minus + p.zero + p.plus - 1.0).abs() <= 4.0 * f64::EPSILON);
        prop_assert!((p.plus - p.minus - v).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn position_moves_by_the_sampled_momentum(seed in any::<u64>(), v in -0.9f64..0.9, force in -0.05f64..0.05) {
        let mut lat = Lattice::new();
        let field = UniformForce { force: Vec3::new(force, 0.0, 0.0), region: Region::default() };
        let cfg = WalkConfig::one_dimensional(0);
        let mut rng = RngStream::new(seed, 0, 0).rng();
        let mut p = ParticleState::new([3, -2, 7], Vec3::new(v, 0.0, 0.0), Vec3::axis(0), 0.0);
        for _ in 0..12 {
            let before = p.position;
            match step(&mut p, &mut lat, &field, &cfg, &mut rng) {
                Ok(_) => {}
                Err(lrm::Error::PropensityOverflow { .. }) => break,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
            prop_assert_eq!(p.position[0] - before[0], i64::from(p.momentum[0]));
            prop_assert_eq!(&p.position[1..], &before[1..]);
        }
    }

    #[test]
    fn quantum_reset_twice_restores_span_and_phase(
        span in prop::array::uniform3(-5i64..5),
        trace in prop::array::uniform3(-5i64..5),
        phase in -3.0f64..3.0,
        trace_phase in -3.0f64..3.0,
        v in -0.5f64..0.5,
    ) {
        let mut p = ParticleState::new([0; 3], Vec3::new(v, 0.0, 0.0), Vec3::axis(0), phase);
        p.span = span;
        let mut node = NodeState { span_trace: trace, phase_trace: trace_phase, bosons: BTreeMap::new() };
        let first = quantum_reset(&mut p, &mut node, 1);
        prop_assert_eq!(first, span != trace);
        prop_assert_eq!(p.span, trace);
        prop_assert_eq!(node.span_trace, span);
        quantum_reset(&mut p, &mut node, 2);
        prop_assert_eq!(p.span, span);
        prop_assert_eq!(node.span_trace, trace);
        prop_assert_eq!(p.phase, phase);
        prop_assert_eq!(node.phase_trace, trace_phase);
    }

    #[test]
    fn particle_bosons_never_grow(w in -2.0f64..2.0, lifetime in 1u64..50, rounds in 1usize..20) {
        let mut p = ParticleState::new([0; 3], Vec3::ZERO, Vec3::axis(0), 0.0);
        p.bosons.insert(([1, 0, 0], [0, 0, 0]), ParticleBoson { momentum: w, lifetime });
        let mut last = w.abs();
        for _ in 0..rounds {
            decay_particle_bosons(&mut p);
            let now = p.boson_sum().abs();
            prop_assert!(now <= last);
            last = now;
        }
    }
}

#[test]
fn same_seed_same_histogram() {
    let s = scenario(4, 24, 200);
    let run = || {
        let mut lat = Lattice::new();
        let out = run_walk_ensemble(&s, &mut lat, 400, RngStream::new(5, 0, 0)).unwrap();
        (out, lat)
    };
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    let (c, _) = {
        let mut lat = Lattice::new();
        (run_walk_ensemble(&s, &mut lat, 400, RngStream::new(6, 0, 0)).unwrap(), ())
    };
    assert_ne!(a.histogram, c.histogram);
}

#[test]
fn trained_lattice_survives_a_snapshot() {
    let s = scenario(6, 16, 100);
    let mut lat = Lattice::new();
    run_walk_ensemble(&s, &mut lat, 100, RngStream::new(9, 0, 0)).unwrap();
    assert!(!lat.is_empty());
    let mut bytes = Vec::new();
    write_snapshot(&lat, &mut bytes).unwrap();
    let back = read_snapshot(bytes.as_slice()).unwrap();
    assert_eq!(back, lat);

    // A resumed run behaves as if it had never stopped.
    let mut resumed = back;
    let mut original = lat;
    let a = run_walk_ensemble(&s, &mut original, 50, RngStream::new(10, 0, 0)).unwrap();
    let b = run_walk_ensemble(&s, &mut resumed, 50, RngStream::new(10, 0, 0)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn every_measured_particle_is_counted_or_dropped() {
    let s = scenario(4, 32, 50);
    let mut lat = Lattice::new();
    let out = run_walk_ensemble(&s, &mut lat, 300, RngStream::new(2, 0, 0)).unwrap();
    assert_eq!(out.histogram.total() + out.overflowed, 300);
    if out.overflowed + out.training_overflowed == 0 {
        assert_eq!(lat.clock(), 350 * 32);
    }
}
