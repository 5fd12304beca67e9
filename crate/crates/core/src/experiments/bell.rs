use rand::Rng;
use rayon::prelude::*;

use crate::emission::{prepare_emission, EmissionConfig, MomentumDist, Plane, Polarization};
use crate::entanglement::{
    chsh_statistic, coincidence_m0, count_coincidences, expected_arrival, joint_pmf, tilde_m, ArrivalRecord, JointPmf,
    Station, TimeCorrection,
};
use crate::error::{Error, Result};
use crate::expected::far_field_momentum;
use crate::oracle::{chi_square_critical, gaussian_source};
use crate::rng::RngStream;
use crate::spin_half::sample_spin;
use crate::types::{PairMode, SourceEnsemble, SpinNumber};
use crate::vec3::Vec3;

use super::config::{BellParams, BellPolarization, CorrectionKind};
use super::report::{BellSetting, BellSummary, GridSummary, Summary, Table};

/// What one emitted pair produced.
struct PairOutcome {
    grid_index: Option<usize>,
    arrival_i: Option<ArrivalRecord>,
    arrival_ii: Option<ArrivalRecord>,
}

pub(super) fn correction(p: &BellParams) -> TimeCorrection {
    match p.correction {
        CorrectionKind::None => TimeCorrection::None,
        CorrectionKind::FirstOrder => TimeCorrection::FirstOrder {
            t0: p.t0(),
            energy: p.energy,
            m2: p.propagation_momentum,
        },
        CorrectionKind::Exact => TimeCorrection::Exact {
            distance: p.distance,
            energy: p.energy,
            period: p.period,
        },
    }
}

fn angle_of(v: Vec3) -> f64 {
    v[0].atan2(v[2])
}

/// Circular distance in grid steps between index `k` and the (possibly fractional) position `c`.
fn grid_distance(k: usize, c: f64, n: usize) -> f64 {
    let d = (k as f64 - c).rem_euclid(n as f64);
    d.min(n as f64 - d)
}

fn near_bisector(k: usize, n: usize) -> bool {
    grid_distance(k, 0.0, n) <= 1.0 + 1e-9 || grid_distance(k, n as f64 / 2.0, n) <= 1.0 + 1e-9
}

fn arrival(station: Station, pair_id: u64, spin: f64, m: f64, emitted_at: f64, u: f64, p: &BellParams) -> Option<ArrivalRecord> {
    if u <= 0.0 {
        return None;
    }
    let flight = expected_arrival(u, p.energy, spin, tilde_m(m, p.n_r), p.distance).ok()?;
    Some(ArrivalRecord {
        station,
        pair_id,
        spin,
        time: emitted_at + flight,
        m0: m,
    })
}

fn simulate_setting(
    p: &BellParams,
    lambda_i: Vec3,
    lambda_ii: Vec3,
    momentum: &SourceEnsemble,
    stream: RngStream,
) -> Result<Vec<PairOutcome>> {
    let (_, m_hat) = coincidence_m0(lambda_i, lambda_ii);
    let plane = Plane::default();
    let emission = EmissionConfig {
        spin: Some(SpinNumber::HALF),
        polarization: match p.polarization {
            BellPolarization::Grid => Polarization::PlanarGrid {
                count: p.n_mu,
                plane,
                offset: angle_of(m_hat),
            },
            BellPolarization::Continuous => Polarization::PlanarContinuous { plane },
        },
        momentum: MomentumDist::Fixed {
            value: Vec3::axis(1) * p.propagation_momentum,
        },
        rho: Vec3::axis(1),
    };
    let source = SourceEnsemble::point([0; 3]).with_pair_mode(PairMode::Entangled);
    (0..p.n_p)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.particle(i).rng();
            let em = prepare_emission(&source, &emission, &mut rng)?;
            let sv = em.first.spin.ok_or_else(|| Error::InconsistentState("pair without spin".into()))?;
            // Both members share one momentum magnitude drawn from the source's far field.
            let u = far_field_momentum(rng.random_range(-1.0..=1.0), momentum, 1)?;
            let m_i = sv.mu.dot(lambda_i);
            let m_ii = (-sv.mu).dot(lambda_ii);
            let s_i = sample_spin(sv.source_spin, tilde_m(m_i, p.n_r));
            let s_ii = sample_spin(-sv.source_spin, tilde_m(m_ii, p.n_r));
            let t = i as f64 * p.period;
            Ok(PairOutcome {
                grid_index: em.grid_index,
                arrival_i: arrival(Station::I, i, s_i, m_i, t, u, p),
                arrival_ii: arrival(Station::II, i, s_ii, m_ii, t, u, p),
            })
        })
        .collect()
}

fn plus_share(a: &[ArrivalRecord]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().filter(|r| r.spin > 0.0).count() as f64 / a.len() as f64
}

pub(super) fn run(p: &BellParams, seed: u64) -> Result<(Summary, Vec<Table>)> {
    let momentum = gaussian_source(p.ns, 1, Vec3::axis(1) * p.propagation_momentum)?;
    let window = p.effective_window();
    let corr = correction(p);
    let plane = Plane::default();

    let mut coincidences = Table::new(
        "coincidences",
        &["angle", "rho_pp", "rho_mm", "rho_pm", "rho_mp", "ref_same", "ref_opp"],
    );
    let mut settings_table = Table::new(
        "settings",
        &[
            "theta_i",
            "theta_ii",
            "emitted",
            "coincidences",
            "accidental",
            "orphans_i",
            "orphans_ii",
            "correlation",
            "ref_correlation",
            "marginal_i",
            "marginal_ii",
        ],
    );
    let mut arrivals_table = Table::new(
        "arrivals",
        &["setting", "pair_id", "station", "spin", "T_raw", "T_corrected", "M0"],
    );

    let grid_mode = p.polarization == BellPolarization::Grid;
    let mut grid_counts = vec![0u64; p.n_mu];
    let (mut near, mut matched_total) = (0u64, 0u64);
    let mut settings = Vec::new();

    for (k, [theta_i, theta_ii]) in p.station_settings().into_iter().enumerate() {
        let lambda_i = plane.direction(theta_i);
        let lambda_ii = plane.direction(theta_ii);
        let pairs = simulate_setting(p, lambda_i, lambda_ii, &momentum, RngStream::new(seed, k as u64, 0))?;

        let arrivals_i: Vec<ArrivalRecord> = pairs.iter().filter_map(|o| o.arrival_i).collect();
        let arrivals_ii: Vec<ArrivalRecord> = pairs.iter().filter_map(|o| o.arrival_ii).collect();
        let found = count_coincidences(&arrivals_i, &arrivals_ii, window, &corr);

        let mut joint = [0u64; 4];
        let mut accidental = 0;
        let mut setting_near = 0u64;
        for c in &found.pairs {
            let (a, b) = (&arrivals_i[c.first], &arrivals_ii[c.second]);
            let cell = match (a.spin > 0.0, b.spin > 0.0) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => 3,
            };
            joint[cell] += 1;
            accidental += u64::from(a.pair_id != b.pair_id);
            if let Some(g) = pairs[a.pair_id as usize].grid_index {
                setting_near += u64::from(near_bisector(g, p.n_mu));
            }
        }
        for o in &pairs {
            if let Some(g) = o.grid_index {
                grid_counts[g] += 1;
            }
        }
        near += setting_near;
        matched_total += found.pairs.len() as u64;

        let joint = JointPmf::from_counts(joint);
        let reference = joint_pmf(lambda_i, lambda_ii);
        let total_arrivals = (arrivals_i.len() + arrivals_ii.len()) as f64;
        let accepted = 2.0 * found.pairs.len() as f64;
        let angle = theta_i - theta_ii;
        let n_coinc = found.pairs.len() as u64;
        let s = BellSetting {
            theta_i,
            theta_ii,
            angle,
            emitted: p.n_p,
            arrivals_i: arrivals_i.len() as u64,
            arrivals_ii: arrivals_ii.len() as u64,
            coincidences: n_coinc,
            accidental,
            orphans_i: found.orphans_i as u64,
            orphans_ii: found.orphans_ii as u64,
            accepted_fraction: if total_arrivals > 0.0 { accepted / total_arrivals } else { 0.0 },
            orphan_fraction: if total_arrivals > 0.0 {
                (found.orphans_i + found.orphans_ii) as f64 / total_arrivals
            } else {
                0.0
            },
            joint,
            reference,
            correlation: joint.correlation(),
            reference_correlation: reference.correlation(),
            marginal_i: plus_share(&arrivals_i),
            marginal_ii: plus_share(&arrivals_ii),
            near_bisector: (grid_mode && n_coinc > 0).then(|| setting_near as f64 / n_coinc as f64),
        };

        coincidences.push(vec![angle, joint.pp, joint.mm, joint.pm, joint.mp, reference.pp, reference.pm]);
        settings_table.push(vec![
            theta_i,
            theta_ii,
            p.n_p as f64,
            n_coinc as f64,
            accidental as f64,
            s.orphans_i as f64,
            s.orphans_ii as f64,
            s.correlation,
            s.reference_correlation,
            s.marginal_i,
            s.marginal_ii,
        ]);
        let mut all: Vec<&ArrivalRecord> = arrivals_i.iter().chain(&arrivals_ii).collect();
        all.sort_by_key(|a| (a.pair_id, a.station == Station::II));
        for a in all {
            arrivals_table.push(vec![
                k as f64,
                a.pair_id as f64,
                if a.station == Station::I { 1.0 } else { 2.0 },
                a.spin,
                a.time,
                corr.station_time(a),
                a.m0,
            ]);
        }
        settings.push(s);
    }

    let grid = grid_mode.then(|| {
        let total: u64 = grid_counts.iter().sum();
        let expected = total as f64 / p.n_mu as f64;
        let chi_square = if expected > 0.0 {
            grid_counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum()
        } else {
            0.0
        };
        GridSummary {
            counts: grid_counts.clone(),
            chi_square,
            critical_1pct: if p.n_mu > 1 { chi_square_critical(p.n_mu - 1, 0.01) } else { 0.0 },
            near_bisector: if matched_total > 0 { near as f64 / matched_total as f64 } else { 0.0 },
        }
    });

    let chsh = p.chsh.map(|_| {
        let e: Vec<f64> = settings.iter().map(|s| s.correlation).collect();
        chsh_statistic(e[0], e[1], e[2], e[3])
    });

    let mut tables = vec![coincidences, settings_table, arrivals_table];
    if let Some(g) = &grid {
        let mut t = Table::new("grid", &["k", "count", "expected"]);
        let total: u64 = g.counts.iter().sum();
        for (k, c) in g.counts.iter().enumerate() {
            t.push(vec![k as f64, *c as f64, total as f64 / p.n_mu as f64]);
        }
        tables.push(t);
    }

    let summary = BellSummary {
        window,
        max_pmf_deviation: settings
            .iter()
            .flat_map(|s| {
                [
                    s.joint.pp - s.reference.pp,
                    s.joint.pm - s.reference.pm,
                    s.joint.mp - s.reference.mp,
                    s.joint.mm - s.reference.mm,
                ]
            })
            .map(f64::abs)
            .fold(0.0, f64::max),
        max_correlation_deviation: settings
            .iter()
            .map(|s| (s.correlation - s.reference_correlation).abs())
            .fold(0.0, f64::max),
        max_marginal_deviation: settings
            .iter()
            .flat_map(|s| [s.marginal_i - 0.5, s.marginal_ii - 0.5])
            .map(f64::abs)
            .fold(0.0, f64::max),
        settings,
        grid,
        chsh,
    };
    Ok((Summary::Bell(summary), tables))
}

pub(super) fn reference_tables(p: &BellParams) -> Vec<Table> {
    let plane = Plane::default();
    let mut t = Table::new("coincidences_reference", &["angle", "ref_same", "ref_opp", "ref_correlation"]);
    for [a, b] in p.station_settings() {
        let r = joint_pmf(plane.direction(a), plane.direction(b));
        t.push(vec![a - b, r.pp, r.pm, r.correlation()]);
    }
    vec![t]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisector_neighbourhood() {
        let hits: Vec<usize> = (0..16).filter(|k| near_bisector(*k, 16)).collect();
        assert_eq!(hits, vec![0, 1, 7, 8, 9, 15]);
    }

    #[test]
    fn grid_anchor_is_the_coincidence_direction() {
        let plane = Plane::default();
        for (a, b) in [(0.3, 0.0), (-2.0, 0.0), (1.0, 2.5)] {
            let (_, m) = coincidence_m0(plane.direction(a), plane.direction(b));
            assert!((plane.direction(angle_of(m)) - m).norm() < 1e-12);
        }
    }
}
