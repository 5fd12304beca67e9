use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::apparatus::SternGerlach;
use crate::emission::{source_spin, spin_vars};
use crate::error::{Error, Result};
use crate::expected::{solve_position, Kinematics, Motion};
use crate::oracle::{compare_distributions, densities_from_spinor, gaussian_source, sg_propagate, Spinor, SpinorPacket};
use crate::rng::RngStream;
use crate::spin_half::{force_for, polarization_from_spinor, sample_spin};
use crate::types::{FieldSpec, ParticleState, SpinNumber};
use crate::vec3::Vec3;
use crate::walk::{step, Lattice, WalkConfig};

use super::config::{Mode, SgSingleParams};
use super::report::{PersistenceSummary, ProfileSummary, SgSingleSummary, Summary, Table};

fn chi(p: &SgSingleParams) -> Spinor {
    p.chi.map(|[re, im]| Complex64::new(re, im))
}

/// Lab axes for the spinor's (sigma1, sigma2, sigma3): sigma3 along the inhomogeneity,
/// sigma2 along the beam, sigma1 on the remaining axis.
fn frame(p: &SgSingleParams) -> [usize; 3] {
    let third = 3 - p.axis - p.propagation_axis;
    [third, p.propagation_axis, p.axis]
}

fn initial_polarization(p: &SgSingleParams) -> Result<Vec3> {
    let local = polarization_from_spinor(chi(p), true)?;
    let mut mu = Vec3::ZERO;
    for (k, d) in frame(p).iter().enumerate() {
        mu[*d] = local[k];
    }
    Ok(mu)
}

fn analyzer(p: &SgSingleParams) -> Result<SternGerlach> {
    let field = FieldSpec::stern_gerlach(Vec3::axis(p.axis), p.magnitude, p.gradient)?;
    let mut sg = SternGerlach::new(field, p.moment);
    sg.gyro = p.gyro;
    sg.boson_density = p.boson_density;
    sg.source_spin = p.source_spin;
    sg.validate()?;
    Ok(sg)
}

/// Integer nodes -t..t-1.
fn grid(t: u64) -> Vec<i64> {
    (-(t as i64)..t as i64).collect()
}

/// Five-point binomial smoothing; the window is truncated and renormalized at the edges.
pub(super) fn smooth5(v: &[f64]) -> Vec<f64> {
    const K: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
    (0..v.len())
        .map(|i| {
            let (mut s, mut w) = (0.0, 0.0);
            for (k, kw) in K.iter().enumerate() {
                let j = i as i64 + k as i64 - 2;
                if j >= 0 && (j as usize) < v.len() {
                    s += kw * v[j as usize];
                    w += kw;
                }
            }
            s / w
        })
        .collect()
}

fn arg_extrema(v: &[f64]) -> (usize, usize) {
    let mut hi = 0;
    let mut lo = 0;
    for i in 0..v.len() {
        if v[i] > v[hi] {
            hi = i;
        }
        if v[i] < v[lo] {
            lo = i;
        }
    }
    (hi, lo)
}

struct PersistenceTally {
    resets: u64,
    forbidden: u64,
    flips: u64,
    up: bool,
    overflowed: bool,
}

fn persistence_particle(p: &SgSingleParams, sg: &SternGerlach, mu0: Vec3, mode: Mode, stream: RngStream) -> Result<PersistenceTally> {
    let mut rng = stream.rng();
    let sv = spin_vars(SpinNumber::HALF, source_spin(&mut rng), mu0);
    let v0 = Vec3::axis(p.propagation_axis) * p.propagation_momentum;
    let mut tally = PersistenceTally {
        resets: 0,
        forbidden: 0,
        flips: 0,
        up: false,
        overflowed: false,
    };
    match mode {
        Mode::ExpectedMotion => {
            let mut sv = sv;
            let t = sg.traverse(&mut sv, v0, p.persistence_steps as u32, &mut rng)?;
            tally.resets = u64::from(t.resets);
            tally.forbidden = u64::from(t.forbidden);
            tally.flips = u64::from(t.flips_after_reset);
            tally.up = t.exit_spin > 0.0;
        }
        Mode::Microscopic => {
            let mut particle = ParticleState::new([0; 3], v0, Vec3::axis(p.axis), 0.0);
            particle.spin = Some(sv);
            let mut lat = Lattice::new();
            let mut cfg = WalkConfig::default();
            cfg.active = [false; 3];
            cfg.active[p.axis] = true;
            cfg.active[p.propagation_axis] = true;
            let mut last = None;
            for _ in 0..p.persistence_steps {
                match step(&mut particle, &mut lat, sg, &cfg, &mut rng) {
                    Ok(ev) => {
                        let spin = particle.spin.expect("spin particle").spin;
                        if tally.resets > 0 && last != Some(spin) {
                            tally.flips += 1;
                        }
                        tally.resets += u64::from(ev.external_reset);
                        tally.forbidden += u64::from(ev.forbidden_reset);
                        last = Some(spin);
                    }
                    Err(Error::PropensityOverflow { .. }) => {
                        tally.overflowed = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            tally.up = particle.spin.expect("spin particle").spin > 0.0;
        }
    }
    Ok(tally)
}

fn persistence(p: &SgSingleParams, seed: u64, mode: Mode) -> Result<PersistenceSummary> {
    let sg = analyzer(p)?;
    let mu0 = initial_polarization(p)?;
    let stream = RngStream::new(seed, 0, 0);
    let tallies: Vec<PersistenceTally> = (0..p.persistence_particles)
        .into_par_iter()
        .map(|i| persistence_particle(p, &sg, mu0, mode, stream.particle(i)))
        .collect::<Result<_>>()?;
    let mut s = PersistenceSummary {
        particles: p.persistence_particles,
        steps: p.persistence_steps,
        p_up_reference: (1.0 + mu0.dot(sg.field.direction)) / 2.0,
        ..PersistenceSummary::default()
    };
    let mut up = 0u64;
    for t in &tallies {
        s.resets += t.resets;
        s.forbidden += t.forbidden;
        s.flips_after_reset += t.flips;
        s.overflowed += u64::from(t.overflowed);
        up += u64::from(t.up && !t.overflowed);
    }
    let kept = s.particles - s.overflowed;
    s.p_up = if kept > 0 { up as f64 / kept as f64 } else { 0.0 };
    Ok(s)
}

/// Oracle densities (rho, <S3>) on the profile grid.
fn oracle_profile(p: &SgSingleParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let ens = gaussian_source(p.ns, p.axis, Vec3::ZERO)?;
    let packet = SpinorPacket::from_ensemble(&ens, p.axis, chi(p))?;
    let nodes: Vec<f64> = grid(p.steps).iter().map(|x| *x as f64).collect();
    // The lattice force on spin up points along -nu.
    let field = sg_propagate(&packet, p.steps as f64, -p.moment * p.gradient, &nodes)?;
    Ok(densities_from_spinor(&field))
}

/// Transverse landing node and spin of one particle under expected motion: the spin is
/// set at analyzer entry and the constant force then bends the trajectory.
fn profile_particle(p: &SgSingleParams, sg: &SternGerlach, mu0: Vec3, ens: &crate::types::SourceEnsemble, stream: RngStream) -> Result<(f64, f64)> {
    let mut rng = stream.rng();
    let src = &ens.sources()[ens.pick(rng.random())];
    let mut v0 = Vec3::ZERO;
    v0[p.axis] = rng.random_range(-1.0..=1.0);
    let s = sample_spin(source_spin(&mut rng), mu0.dot(sg.field.direction));
    let force = force_for(s, &sg.field, sg.moment)[p.axis];
    let motion = Motion::along(p.axis, Kinematics::FreeFall { force });
    let x = solve_position(Vec3::from_ints(src.position), v0, p.steps as f64, ens, Vec3::axis(p.axis), &motion)?;
    Ok((x[p.axis], s))
}

fn profile(p: &SgSingleParams, seed: u64) -> Result<(ProfileSummary, Table)> {
    let sg = analyzer(p)?;
    let mu0 = initial_polarization(p)?;
    let ens = gaussian_source(p.ns, p.axis, Vec3::ZERO)?;
    let stream = RngStream::new(seed, 1, 0);
    let landed: Vec<(f64, f64)> = (0..p.n_p)
        .into_par_iter()
        .map(|i| profile_particle(p, &sg, mu0, &ens, stream.particle(i)))
        .collect::<Result<_>>()?;

    let nodes = grid(p.steps);
    let lo = nodes[0];
    let mut counts = vec![0.0; nodes.len()];
    let mut spin = vec![0.0; nodes.len()];
    let mut outside = 0;
    for (x, s) in &landed {
        let k = x.round() as i64 - lo;
        if k < 0 || k as usize >= nodes.len() {
            outside += 1;
            continue;
        }
        counts[k as usize] += 1.0;
        spin[k as usize] += s;
    }
    let n = p.n_p.max(1) as f64;
    let density: Vec<f64> = counts.iter().map(|c| c / n).collect();
    let spin_density: Vec<f64> = spin.iter().map(|s| s / n).collect();
    let smoothed = smooth5(&spin_density);
    let (ref_density, ref_spin) = oracle_profile(p)?;
    let cmp = compare_distributions(&counts, &ref_density)?;

    let (hi, lo_i) = arg_extrema(&smoothed);
    let (rhi, rlo) = arg_extrema(&ref_spin);
    let side = |f: fn(i64) -> bool| -> f64 { nodes.iter().zip(&smoothed).filter(|(x, _)| f(**x)).map(|(_, v)| v).sum() };
    let summary = ProfileSummary {
        particles: p.n_p,
        outside,
        total_variation: cmp.total_variation,
        spin_max_at: nodes[hi],
        spin_min_at: nodes[lo_i],
        reference_spin_max_at: nodes[rhi],
        reference_spin_min_at: nodes[rlo],
        spin_left: side(|x| x < 0),
        spin_right: side(|x| x > 0),
    };

    let mut table = Table::new(
        "profile",
        &["x", "density", "ref_density", "spin_density", "spin_density_smoothed", "ref_spin_density"],
    );
    for (k, x) in nodes.iter().enumerate() {
        table.push(vec![*x as f64, density[k], ref_density[k], spin_density[k], smoothed[k], ref_spin[k]]);
    }
    Ok((summary, table))
}

pub(super) fn run(p: &SgSingleParams, seed: u64, mode: Mode) -> Result<(Summary, Vec<Table>)> {
    let persistence = persistence(p, seed, mode)?;
    let (profile, table) = profile(p, seed)?;
    Ok((Summary::SgSingle(SgSingleSummary { persistence, profile }), vec![table]))
}

pub(super) fn reference_tables(p: &SgSingleParams) -> Result<Vec<Table>> {
    let (rho, s3) = oracle_profile(p)?;
    let mut t = Table::new("profile_reference", &["x", "ref_density", "ref_spin_density"]);
    for (k, x) in grid(p.steps).iter().enumerate() {
        t.push(vec![*x as f64, rho[k], s3[k]]);
    }
    Ok(vec![t])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothing_keeps_constants_and_mass() {
        assert_eq!(smooth5(&[2.0; 7]), vec![2.0; 7]);
        let s = smooth5(&[0.0, 0.0, 0.0, 0.0, 16.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(s, vec![0.0, 0.0, 1.0, 4.0, 6.0, 4.0, 1.0, 0.0, 0.0]);
        // Truncated windows are renormalized.
        assert_eq!(smooth5(&[3.0, 0.0, 0.0])[0], 3.0 * 6.0 / 11.0);
    }

    #[test]
    fn default_frame_is_the_standard_basis() {
        let p = SgSingleParams::default();
        let mu = initial_polarization(&p).unwrap();
        assert!((mu - Vec3::axis(0)).norm() < 1e-12);
    }
}
