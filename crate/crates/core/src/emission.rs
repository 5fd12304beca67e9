//! Random-variable preparation at the sources.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{PairMode, ParticleState, SourceEnsemble, SpinNumber, SpinVars};
use crate::vec3::Vec3;

/// An oriented plane spanned by two orthonormal directions.
/// Angle 0 points along `u`, angle pi/2 along `w`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub u: Vec3,
    pub w: Vec3,
}

impl Plane {
    /// The x3-x1 plane: angle 0 is +x3, angle pi/2 is +x1.
    pub const ZX: Plane = Plane {
        u: Vec3::new(0.0, 0.0, 1.0),
        w: Vec3::new(1.0, 0.0, 0.0),
    };

    pub fn direction(&self, angle: f64) -> Vec3 {
        self.u * angle.cos() + self.w * angle.sin()
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let ok = (self.u.norm_sq() - 1.0).abs() < 1e-9
            && (self.w.norm_sq() - 1.0).abs() < 1e-9
            && self.u.dot(self.w).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(Error::config(path, "plane vectors must be orthonormal"))
        }
    }
}

impl Default for Plane {
    fn default() -> Self {
        Plane::ZX
    }
}

/// How the source polarization direction is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Polarization {
    UniformSphere,
    /// One of `count` equally spaced directions in `plane`, starting at `offset`.
    PlanarGrid {
        count: usize,
        #[serde(default)]
        plane: Plane,
        #[serde(default)]
        offset: f64,
    },
    PlanarContinuous {
        #[serde(default)]
        plane: Plane,
    },
    Fixed {
        direction: Vec3,
    },
}

impl Default for Polarization {
    fn default() -> Self {
        Polarization::UniformSphere
    }
}

/// How the source momentum v0 is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentumDist {
    Fixed { value: Vec3 },
    /// Independent Uniform[-1, 1] on each flagged axis, zero elsewhere.
    Uniform { axes: [bool; 3] },
}

impl Default for MomentumDist {
    fn default() -> Self {
        MomentumDist::Fixed { value: Vec3::ZERO }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmissionConfig {
    /// `None` emits spinless particles.
    #[serde(default)]
    pub spin: Option<SpinNumber>,
    #[serde(default)]
    pub polarization: Polarization,
    #[serde(default)]
    pub momentum: MomentumDist,
    /// Momentum polarization; normalized on use.
    #[serde(default = "default_rho")]
    pub rho: Vec3,
}

fn default_rho() -> Vec3 {
    Vec3::axis(0)
}

impl Default for EmissionConfig {
    fn default() -> Self {
        EmissionConfig {
            spin: None,
            polarization: Polarization::UniformSphere,
            momentum: MomentumDist::default(),
            rho: default_rho(),
        }
    }
}

impl EmissionConfig {
    pub fn validate(&self) -> Result<()> {
        match self.polarization {
            Polarization::PlanarGrid { count, plane, offset } => {
                if count == 0 {
                    return Err(Error::config("polarization.count", "must be positive"));
                }
                if !offset.is_finite() {
                    return Err(Error::config("polarization.offset", "must be finite"));
                }
                plane.validate("polarization.plane")?;
            }
            Polarization::PlanarContinuous { plane } => plane.validate("polarization.plane")?,
            Polarization::Fixed { direction } => {
                direction
                    .normalized()
                    .ok_or_else(|| Error::config("polarization.direction", "must be non-zero"))?;
            }
            Polarization::UniformSphere => {}
        }
        if let MomentumDist::Fixed { value } = self.momentum {
            if value.0.iter().any(|c| !(c.abs() <= 1.0)) {
                return Err(Error::config("momentum.value", "components must lie in [-1, 1]"));
            }
        }
        self.rho
            .normalized()
            .ok_or_else(|| Error::config("rho", "must be non-zero"))?;
        Ok(())
    }
}

/// One emission event: a particle, or an entangled pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Emission {
    pub source: usize,
    /// Index into the planar grid when the grid mode drew the polarization.
    pub grid_index: Option<usize>,
    pub first: ParticleState,
    pub second: Option<ParticleState>,
}

/// Rounds a source spin onto the (2S+1)-point grid: Round(S(1+s0))/S - 1.
pub fn round_spin(s0: f64, s: SpinNumber) -> f64 {
    let sv = s.value();
    (sv * (1.0 + s0)).round() / sv - 1.0
}

/// A direction drawn uniformly from the unit sphere.
pub fn uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Source spin s0 ~ Uniform[-1, 1].
pub fn source_spin<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-1.0..=1.0)
}

fn polarization_direction<R: Rng + ?Sized>(p: Polarization, rng: &mut R) -> (Vec3, Option<usize>) {
    match p {
        Polarization::UniformSphere => (uniform_direction(rng), None),
        Polarization::PlanarGrid { count, plane, offset } => {
            let k = rng.random_range(0..count);
            let angle = offset + std::f64::consts::TAU * k as f64 / count as f64;
            (plane.direction(angle), Some(k))
        }
        Polarization::PlanarContinuous { plane } => {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            (plane.direction(angle), None)
        }
        Polarization::Fixed { direction } => (direction.normalized().unwrap_or(Vec3::axis(2)), None),
    }
}

/// Spin variables for a source spin `s0` and polarization direction `u`.
///
/// For S = 1/2 the polarization is the unit vector itself. For larger S the magnitudes
/// follow the rounded source spin: |mu|^2 = s~0^2 and |tau|^2 = (S+1)/S - s~0^2, both
/// along `u`.
pub fn spin_vars(number: SpinNumber, s0: f64, u: Vec3) -> SpinVars {
    if number == SpinNumber::HALF {
        return SpinVars {
            number,
            source_spin: s0,
            spin: if s0 >= 0.0 { 1.0 } else { -1.0 },
            mu: u,
            tau: Vec3::ZERO,
        };
    }
    let st = round_spin(s0, number);
    SpinVars {
        number,
        source_spin: s0,
        spin: st,
        mu: u * st,
        tau: u * (number.budget() - st * st).max(0.0).sqrt(),
    }
}

/// Draws one emission. Draw order is fixed (source, momentum, spin, direction) so streams replay exactly.
pub fn prepare_emission<R: Rng + ?Sized>(
    ens: &SourceEnsemble,
    cfg: &EmissionConfig,
    rng: &mut R,
) -> Result<Emission> {
    cfg.validate()?;
    let source = ens.pick(rng.random());
    let src = &ens.sources()[source];

    let v0 = match cfg.momentum {
        MomentumDist::Fixed { value } => value,
        MomentumDist::Uniform { axes } => {
            let mut v = Vec3::ZERO;
            for (d, on) in axes.iter().enumerate() {
                if *on {
                    v[d] = rng.random_range(-1.0..=1.0);
                }
            }
            v
        }
    };
    let rho = cfg.rho.normalized().expect("validated");

    let mut first = ParticleState::new(src.position, v0, rho, src.total_phase());
    let mut grid_index = None;
    if let Some(number) = cfg.spin {
        let s0 = source_spin(rng);
        let (u, k) = polarization_direction(cfg.polarization, rng);
        grid_index = k;
        first.spin = Some(spin_vars(number, s0, u));
    }

    let second = (ens.pair_mode() == PairMode::Entangled).then(|| {
        let mut p = ParticleState::new(src.position, -v0, rho, src.total_phase());
        p.spin = first.spin.map(|sv| SpinVars {
            number: sv.number,
            source_spin: -sv.source_spin,
            spin: -sv.spin,
            mu: -sv.mu,
            tau: -sv.tau,
        });
        p
    });

    Ok(Emission {
        source,
        grid_index,
        first,
        second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn round_spin_examples() {
        assert_eq!(round_spin(0.9, SpinNumber::HALF), 1.0);
        assert_eq!(round_spin(-0.2, SpinNumber::ONE), 0.0);
        let three_halves = SpinNumber::from_twice(3).unwrap();
        assert!((round_spin(0.4, three_halves) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn point_source_always_emits_there() {
        let ens = SourceEnsemble::point([3, -1, 2]);
        let mut rng = RngStream::new(1, 0, 0).rng();
        for _ in 0..100 {
            let e = prepare_emission(&ens, &EmissionConfig::default(), &mut rng).unwrap();
            assert_eq!(e.first.position, [3, -1, 2]);
        }
    }

    #[test]
    fn spin_one_magnitudes() {
        for s0 in [-0.9, -0.3, 0.2, 0.7] {
            let v = spin_vars(SpinNumber::ONE, s0, Vec3::new(0.6, 0.0, 0.8));
            let st = round_spin(s0, SpinNumber::ONE);
            assert!((v.mu.norm_sq() - st * st).abs() < 1e-12);
            assert!((v.tau.norm_sq() - (2.0 - st * st)).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_directions_are_anchored() {
        let cfg = EmissionConfig {
            spin: Some(SpinNumber::HALF),
            polarization: Polarization::PlanarGrid {
                count: 4,
                plane: Plane::ZX,
                offset: 0.0,
            },
            ..EmissionConfig::default()
        };
        let mut rng = RngStream::new(3, 0, 0).rng();
        for _ in 0..50 {
            let e = prepare_emission(&SourceEnsemble::point([0; 3]), &cfg, &mut rng).unwrap();
            let k = e.grid_index.unwrap();
            let want = Plane::ZX.direction(std::f64::consts::FRAC_PI_2 * k as f64);
            assert!((e.first.spin.unwrap().mu - want).norm() < 1e-12);
        }
    }
}
