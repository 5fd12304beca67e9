//! A Stern-Gerlach analyzer: the per-step spin dynamics inside a field region and the
//! force-boson captures that reset the spin. Usable on its own (spin-only traversal) or
//! as the external field of a lattice walk.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::emission::source_spin;
use crate::error::{Error, Result};
use crate::spin_half::{evolve_polarization, force_for, sample_spin, spin_external_reset};
use crate::spin_higher::{higher_er, sample_spin_general, spin1_pmf, spin_moments, HigherSpinState};
use crate::types::{FieldSpec, ParticleState, SpinNumber, SpinVars};
use crate::vec3::Vec3;
use crate::walk::{refresh_propensity, Capture, ExternalField};

/// What happens to the source spin s0 at a spin reset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceSpinPolicy {
    /// Draw a fresh s0 ~ Uniform[-1, 1]: the reset acts as a new emission. Persistence is
    /// unaffected because the reset leaves M = s, and cascaded analyzers then follow the
    /// cascade law.
    #[default]
    RedrawAtReset,
    /// Keep the emitted s0 for the particle's whole life.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SternGerlach {
    pub field: FieldSpec,
    /// Magnetic moment mu_M.
    pub moment: f64,
    /// Gyromagnetic factor gamma; the precession step is gamma mu_M B_M.
    #[serde(default = "one")]
    pub gyro: f64,
    /// Probability that a node inside the region hosts a force boson.
    #[serde(default = "one")]
    pub boson_density: f64,
    #[serde(default)]
    pub source_spin: SourceSpinPolicy,
    /// Restore |mu| (and |tau|) after each precession step.
    #[serde(default)]
    pub renormalize: bool,
}

fn one() -> f64 {
    1.0
}

/// Spin history of one pass through an analyzer.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Traversal {
    pub exit_spin: f64,
    pub resets: u32,
    pub forbidden: u32,
    /// Spin changes between consecutive steps after the first reset.
    pub flips_after_reset: u32,
    pub propensity: Vec3,
}

/// Spin part of a successful capture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinCapture {
    pub propensity: Vec3,
    pub force: Vec3,
}

impl SternGerlach {
    pub fn new(field: FieldSpec, moment: f64) -> Self {
        SternGerlach {
            field,
            moment,
            gyro: 1.0,
            boson_density: 1.0,
            source_spin: SourceSpinPolicy::RedrawAtReset,
            renormalize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.boson_density) {
            return Err(Error::config("boson_density", "must lie in [0, 1]"));
        }
        if !(self.moment.is_finite() && self.gyro.is_finite()) {
            return Err(Error::config("moment", "coupling constants must be finite"));
        }
        Ok(())
    }

    /// Precession angle per iteration.
    pub fn eta(&self) -> f64 {
        self.gyro * self.moment * self.field.magnitude
    }

    /// Precesses the polarization(s) one step and samples the spin.
    pub fn evolve_spin(&self, sv: &mut SpinVars) -> Result<()> {
        let eta = self.eta();
        let lambda = self.field.direction;
        let precess = |v: Vec3| {
            let next = evolve_polarization(v, &self.field, eta);
            match (self.renormalize, next.normalized()) {
                (true, Some(u)) => u * v.norm(),
                _ => next,
            }
        };
        sv.mu = precess(sv.mu);
        if sv.number == SpinNumber::HALF {
            sv.spin = sample_spin(sv.source_spin, sv.mu.dot(lambda));
            return Ok(());
        }
        sv.tau = precess(sv.tau);
        if sv.number != SpinNumber::ONE {
            return Err(Error::Unsupported(
                "spin sampling above S = 1 needs an externally supplied pmf".into(),
            ));
        }
        let (m, v) = spin_moments(sv.mu, sv.tau, lambda)?;
        let pmf = spin1_pmf(m, v)?;
        sv.spin = sample_spin_general(sv.number, sv.source_spin, &pmf.ascending())?;
        Ok(())
    }

    /// Spin reset at a capture: energy-compensating rescale, mu <- s lambda (and tau),
    /// s0 per policy, then the force for the new spin. `None` when the reset is forbidden.
    pub fn reset<R: Rng + ?Sized>(
        &self,
        sv: &mut SpinVars,
        propensity: Vec3,
        rng: &mut R,
    ) -> Result<Option<SpinCapture>> {
        let m = sv.mu.dot(self.field.direction);
        let r = match spin_external_reset(sv.spin, m, propensity, &self.field, self.moment) {
            Ok(r) => r,
            Err(Error::ForbiddenReset { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let mut hs = HigherSpinState::from(*sv);
        higher_er(&mut hs, self.field.direction, sv.spin);
        sv.mu = hs.mu;
        sv.tau = hs.tau;
        if self.source_spin == SourceSpinPolicy::RedrawAtReset {
            sv.source_spin = source_spin(rng);
        }
        Ok(Some(SpinCapture {
            propensity: r.propensity,
            force: force_for(sv.spin, &self.field, self.moment),
        }))
    }

    fn boson_present<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        self.boson_density >= 1.0 || rng.random::<f64>() < self.boson_density
    }

    /// Spin-only pass of `steps` iterations, every one inside the field.
    pub fn traverse<R: Rng + ?Sized>(
        &self,
        sv: &mut SpinVars,
        mut propensity: Vec3,
        steps: u32,
        rng: &mut R,
    ) -> Result<Traversal> {
        let mut out = Traversal::default();
        let mut last = None;
        for _ in 0..steps {
            self.evolve_spin(sv)?;
            if out.resets > 0 && last != Some(sv.spin) {
                out.flips_after_reset += 1;
            }
            if self.boson_present(rng) {
                match self.reset(sv, propensity, rng)? {
                    Some(c) => {
                        propensity = c.propensity + c.force;
                        out.resets += 1;
                    }
                    None => out.forbidden += 1,
                }
            }
            last = Some(sv.spin);
        }
        out.exit_spin = sv.spin;
        out.propensity = propensity;
        Ok(out)
    }
}

impl ExternalField for SternGerlach {
    fn evolve<R: Rng + ?Sized>(&self, p: &mut ParticleState, _rng: &mut R) -> Result<()> {
        if !self.field.region.contains(p.position) {
            return Ok(());
        }
        match p.spin.as_mut() {
            Some(sv) => self.evolve_spin(sv),
            None => Ok(()),
        }
    }

    fn capture<R: Rng + ?Sized>(&self, p: &mut ParticleState, _n: u64, rng: &mut R) -> Result<Capture> {
        if p.spin.is_none() || !self.field.region.contains(p.position) || !self.boson_present(rng) {
            return Ok(Capture::None);
        }
        let propensity = p.propensity;
        let sv = p.spin.as_mut().expect("checked above");
        match self.reset(sv, propensity, rng)? {
            None => Ok(Capture::Forbidden),
            Some(c) => {
                // The rescaled propensity becomes the new source momentum; the base
                // reset then adds the force on top of it.
                p.source_momentum = c.propensity;
                p.force_momentum = Vec3::ZERO;
                p.bosons.clear();
                refresh_propensity(p);
                Ok(Capture::Boson(c.force))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emission::spin_vars;
    use crate::rng::RngStream;

    fn analyzer() -> SternGerlach {
        SternGerlach::new(FieldSpec::stern_gerlach(Vec3::axis(2), 0.04, 0.01).unwrap(), 1.0)
    }

    #[test]
    fn spin_persists_after_the_first_reset() {
        let sg = analyzer();
        let mut rng = RngStream::new(11, 0, 0).rng();
        for i in 0..200 {
            let u = Vec3::new((i as f64).sin(), 0.3, (i as f64).cos()).normalized().unwrap();
            let mut sv = spin_vars(SpinNumber::HALF, rng.random_range(-1.0..1.0), u);
            let t = sg.traverse(&mut sv, Vec3::new(0.0, 0.7, 0.0), 30, &mut rng).unwrap();
            assert_eq!(t.flips_after_reset, 0);
            assert_eq!(t.resets, 30);
            assert_eq!(sv.mu, Vec3::axis(2) * t.exit_spin);
        }
    }

    #[test]
    fn forbidden_resets_are_counted_and_skipped() {
        let sg = SternGerlach::new(FieldSpec::stern_gerlach(Vec3::axis(2), 10.0, 0.0).unwrap(), 1.0);
        let mut rng = RngStream::new(1, 0, 0).rng();
        let mut sv = spin_vars(SpinNumber::HALF, 0.9, -Vec3::axis(2));
        let t = sg.traverse(&mut sv, Vec3::new(0.0, 0.1, 0.0), 1, &mut rng).unwrap();
        // s = sign(0.9 - 1) = -1 = M: no energy jump, so the reset goes through.
        assert_eq!(t.resets, 1);
        let mut sv = spin_vars(SpinNumber::HALF, 0.9, Vec3::axis(0));
        sv.source_spin = 0.9;
        let t = sg.traverse(&mut sv, Vec3::new(0.0, 0.1, 0.0), 1, &mut rng).unwrap();
        assert_eq!((t.resets, t.forbidden), (0, 1));
    }

    #[test]
    fn spin_one_reset_zeroes_the_variance() {
        let sg = analyzer();
        let mut rng = RngStream::new(2, 0, 0).rng();
        let mut sv = spin_vars(SpinNumber::ONE, 0.8, Vec3::new(0.6, 0.0, 0.8));
        sg.traverse(&mut sv, Vec3::new(0.0, 0.7, 0.0), 3, &mut rng).unwrap();
        let (m, v) = spin_moments(sv.mu, sv.tau, Vec3::axis(2)).unwrap();
        assert_eq!(m, sv.spin);
        assert!(v.abs() < 1e-15);
    }
}
