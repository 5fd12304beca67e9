use rayon::prelude::*;

use crate::apparatus::{SourceSpinPolicy, SternGerlach};
use crate::emission::{source_spin, spin_vars, uniform_direction, Plane};
use crate::error::Result;
use crate::oracle::wigner_reference;
use crate::rng::RngStream;
use crate::spin_half::cascade_pmf;
use crate::spin_higher::spin1_cascade_pmf;
use crate::types::{FieldSpec, SpinNumber};
use crate::vec3::Vec3;

use super::config::{Mode, SgCascadeParams, Spin1CascadeParams};
use super::report::{CascadeRow, CascadeSummary, Summary, Table};

/// The parameters both cascade kinds share.
struct Cascade {
    number: SpinNumber,
    n_p: u64,
    steps: u32,
    moment: f64,
    magnitude: f64,
    gradient: f64,
    gyro: f64,
    boson_density: f64,
    source_spin: SourceSpinPolicy,
    propagation_momentum: f64,
    renormalize: bool,
}

impl Cascade {
    fn analyzer(&self, direction: Vec3) -> Result<SternGerlach> {
        let field = FieldSpec::stern_gerlach(direction, self.magnitude, self.gradient)?;
        let mut sg = SternGerlach::new(field, self.moment);
        sg.gyro = self.gyro;
        sg.boson_density = self.boson_density;
        sg.source_spin = self.source_spin;
        sg.renormalize = self.renormalize;
        sg.validate()?;
        Ok(sg)
    }

    /// (s1, s2, forbidden resets) per particle, in particle order.
    fn simulate(&self, angle: f64, mode: Mode, stream: RngStream) -> Result<Vec<(f64, f64, u32)>> {
        let first = self.analyzer(Vec3::axis(2))?;
        let second = self.analyzer(Plane::default().direction(angle))?;
        // Expected motion samples the spin once at entry and resets once.
        let steps = match mode {
            Mode::Microscopic => self.steps,
            Mode::ExpectedMotion => 1,
        };
        let v0 = Vec3::axis(1) * self.propagation_momentum;
        (0..self.n_p)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream.particle(i).rng();
                let s0 = source_spin(&mut rng);
                let mut sv = spin_vars(self.number, s0, uniform_direction(&mut rng));
                let a = first.traverse(&mut sv, v0, steps, &mut rng)?;
                let b = second.traverse(&mut sv, a.propensity, steps, &mut rng)?;
                Ok((a.exit_spin, b.exit_spin, a.forbidden + b.forbidden))
            })
            .collect()
    }

    fn run(
        &self,
        settings: &[(f64, f64)],
        mode: Mode,
        seed: u64,
        reference: impl Fn(f64, f64, f64) -> Result<f64>,
    ) -> Result<(Vec<CascadeRow>, u64, u64, Table)> {
        let grid = self.number.grid();
        let mut rows = Vec::new();
        let mut forbidden = 0;
        let mut min_cell = u64::MAX;
        let mut table = Table::new("cascade", &["setting", "s1", "s2", "count", "n_s1", "frequency", "reference"]);
        for (k, &(setting, angle)) in settings.iter().enumerate() {
            let out = self.simulate(angle, mode, RngStream::new(seed, k as u64, 0))?;
            let n = grid.len();
            let mut counts = vec![vec![0u64; n]; n];
            for (s1, s2, f) in &out {
                forbidden += u64::from(*f);
                let (Some(a), Some(b)) = (self.number.grid_index(*s1), self.number.grid_index(*s2)) else {
                    continue;
                };
                counts[a][b] += 1;
            }
            for (a, s1) in grid.iter().enumerate() {
                let n_s1: u64 = counts[a].iter().sum();
                min_cell = min_cell.min(n_s1);
                for (b, s2) in grid.iter().enumerate() {
                    let frequency = if n_s1 > 0 { counts[a][b] as f64 / n_s1 as f64 } else { 0.0 };
                    let r = reference(setting, *s1, *s2)?;
                    table.push(vec![setting, *s1, *s2, counts[a][b] as f64, n_s1 as f64, frequency, r]);
                    rows.push(CascadeRow {
                        setting,
                        s1: *s1,
                        s2: *s2,
                        count: counts[a][b],
                        n_s1,
                        frequency,
                        reference: r,
                    });
                }
            }
        }
        Ok((rows, forbidden, if min_cell == u64::MAX { 0 } else { min_cell }, table))
    }
}

fn max_deviation(rows: &[CascadeRow]) -> f64 {
    rows.iter()
        .filter(|r| r.n_s1 > 0)
        .map(|r| (r.frequency - r.reference).abs())
        .fold(0.0, f64::max)
}

fn half_reference(angle: f64, s1: f64, s2: f64) -> Result<f64> {
    let (up, down) = cascade_pmf(Vec3::axis(2), Plane::default().direction(angle), s1);
    Ok(if s2 > 0.0 { up } else { down })
}

fn spin1_reference(y: f64, s1: f64, s2: f64) -> Result<f64> {
    Ok(spin1_cascade_pmf(y, s1)?.get(s2))
}

/// Largest gap between the moment-route pmf and |d^1|^2 over every (Y, s1, s2).
pub fn spin1_reference_gap(cosines: &[f64]) -> Result<f64> {
    let number = SpinNumber::ONE;
    let mut gap: f64 = 0.0;
    for &y in cosines {
        for s1 in number.grid() {
            let moments = spin1_cascade_pmf(y, s1)?.ascending();
            let wigner = wigner_reference(number, y, s1)?;
            for (a, b) in moments.iter().zip(&wigner) {
                gap = gap.max((a - b).abs());
            }
        }
    }
    Ok(gap)
}

pub(super) fn run_half(p: &SgCascadeParams, seed: u64, mode: Mode) -> Result<(Summary, Vec<Table>)> {
    let c = Cascade {
        number: SpinNumber::HALF,
        n_p: p.n_p,
        steps: p.steps,
        moment: p.moment,
        magnitude: p.magnitude,
        gradient: p.gradient,
        gyro: p.gyro,
        boson_density: p.boson_density,
        source_spin: p.source_spin,
        propagation_momentum: p.propagation_momentum,
        renormalize: p.renormalize,
    };
    let settings: Vec<(f64, f64)> = p.angles.iter().map(|a| (*a, *a)).collect();
    let (rows, forbidden, min_cell, table) = c.run(&settings, mode, seed, half_reference)?;
    let summary = CascadeSummary {
        max_deviation: max_deviation(&rows),
        rows,
        min_cell,
        forbidden,
        reference_gap: None,
    };
    Ok((Summary::SgCascade(summary), vec![table]))
}

pub(super) fn run_spin1(p: &Spin1CascadeParams, seed: u64, mode: Mode) -> Result<(Summary, Vec<Table>)> {
    let c = Cascade {
        number: SpinNumber::ONE,
        n_p: p.n_p,
        steps: p.steps,
        moment: p.moment,
        magnitude: p.magnitude,
        gradient: p.gradient,
        gyro: p.gyro,
        boson_density: p.boson_density,
        source_spin: p.source_spin,
        propagation_momentum: p.propagation_momentum,
        renormalize: p.renormalize,
    };
    let settings: Vec<(f64, f64)> = p.cosines.iter().map(|y| (*y, y.clamp(-1.0, 1.0).acos())).collect();
    let (rows, forbidden, min_cell, table) = c.run(&settings, mode, seed, spin1_reference)?;
    let summary = CascadeSummary {
        max_deviation: max_deviation(&rows),
        rows,
        min_cell,
        forbidden,
        reference_gap: Some(spin1_reference_gap(&p.cosines)?),
    };
    Ok((Summary::Spin1Cascade(summary), vec![table]))
}

pub(super) fn half_reference_tables(p: &SgCascadeParams) -> Result<Vec<Table>> {
    let mut t = Table::new("cascade_reference", &["setting", "s1", "s2", "reference"]);
    for &a in &p.angles {
        for s1 in [-1.0, 1.0] {
            for s2 in [-1.0, 1.0] {
                t.push(vec![a, s1, s2, half_reference(a, s1, s2)?]);
            }
        }
    }
    Ok(vec![t])
}

pub(super) fn spin1_reference_tables(p: &Spin1CascadeParams) -> Result<Vec<Table>> {
    let number = SpinNumber::ONE;
    let mut t = Table::new("cascade_reference", &["setting", "s1", "s2", "reference", "wigner"]);
    for &y in &p.cosines {
        for s1 in number.grid() {
            let w = wigner_reference(number, y, s1)?;
            for (k, s2) in number.grid().into_iter().enumerate() {
                t.push(vec![y, s1, s2, spin1_reference(y, s1, s2)?, w[k]]);
            }
        }
    }
    Ok(vec![t])
}
