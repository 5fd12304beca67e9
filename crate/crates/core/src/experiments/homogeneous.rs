use rayon::prelude::*;

use crate::apparatus::SternGerlach;
use crate::emission::{source_spin, spin_vars, Plane};
use crate::error::Result;
use crate::rng::RngStream;
use crate::spin_half::sample_spin;
use crate::types::{FieldSpec, SpinNumber};
use crate::vec3::Vec3;

use super::config::{HomogeneousParams, Mode};
use super::report::{HomogeneousSummary, SpinLawRow, Summary, Table};

fn reference(angle: f64) -> f64 {
    (1.0 + angle.cos()) / 2.0
}

pub(super) fn run(p: &HomogeneousParams, seed: u64, mode: Mode) -> Result<(Summary, Vec<Table>)> {
    let field = FieldSpec::homogeneous(Vec3::axis(2), p.magnitude)?;
    let mut sg = SternGerlach::new(field, p.moment);
    sg.gyro = p.gyro;
    sg.renormalize = p.renormalize;
    sg.validate()?;

    let mut rows = Vec::new();
    let mut table = Table::new("spin_law", &["angle", "particles", "p_up", "ref_p_up"]);
    for (a, &angle) in p.angles.iter().enumerate() {
        let mu0 = Plane::default().direction(angle);
        let stream = RngStream::new(seed, a as u64, 0);
        let spins: Vec<f64> = (0..p.n_p)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream.particle(i).rng();
                let mut sv = spin_vars(SpinNumber::HALF, source_spin(&mut rng), mu0);
                match mode {
                    Mode::ExpectedMotion => Ok(sample_spin(sv.source_spin, mu0.dot(field.direction))),
                    // No gradient means no force bosons: the spin is resampled every
                    // step from a precessing polarization.
                    Mode::Microscopic => {
                        for _ in 0..p.steps {
                            sg.evolve_spin(&mut sv)?;
                        }
                        Ok(sv.spin)
                    }
                }
            })
            .collect::<Result<_>>()?;
        let up = spins.iter().filter(|s| **s > 0.0).count() as f64;
        let p_up = if p.n_p > 0 { up / p.n_p as f64 } else { 0.0 };
        table.push(vec![angle, p.n_p as f64, p_up, reference(angle)]);
        rows.push(SpinLawRow {
            angle,
            particles: p.n_p,
            p_up,
            reference: reference(angle),
        });
    }
    let max_deviation = rows.iter().map(|r| (r.p_up - r.reference).abs()).fold(0.0, f64::max);
    Ok((Summary::Homogeneous(HomogeneousSummary { rows, max_deviation }), vec![table]))
}

pub(super) fn reference_tables(p: &HomogeneousParams) -> Vec<Table> {
    let mut t = Table::new("spin_law_reference", &["angle", "ref_p_up"]);
    for &a in &p.angles {
        t.push(vec![a, reference(a)]);
    }
    vec![t]
}
