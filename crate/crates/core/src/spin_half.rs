//! Spin-1/2 dynamics: precession, spin sampling, magnetic force, the spin External Reset,
//! the spinor correspondence and the analytic pmfs.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::types::FieldSpec;
use crate::vec3::Vec3;

/// Spin-1/2 state together with its coupling constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinHalfState {
    pub mu: Vec3,
    pub source_spin: f64,
    pub spin: f64,
    /// Precession step per iteration, gamma * mu_M * B_M.
    pub eta: f64,
    /// Magnetic moment magnitude mu_M.
    pub moment: f64,
}

impl SpinHalfState {
    /// Spin propensity M = mu . lambda.
    pub fn propensity(&self, field: &FieldSpec) -> f64 {
        self.mu.dot(field.direction)
    }
}

/// One explicit Euler step of mu' = -eta mu x lambda.
///
/// M = mu . lambda is conserved exactly; |mu|^2 grows by eta^2 |mu x lambda|^2.
pub fn evolve_polarization(mu: Vec3, field: &FieldSpec, eta: f64) -> Vec3 {
    mu - mu.cross(field.direction) * eta
}

/// s = sign(s0 + M); an exact tie counts as +1.
pub fn sample_spin(s0: f64, m: f64) -> f64 {
    if s0 + m >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// f = -mu_M B_F M nu, with M = mu . lambda.
pub fn magnetic_force(mu: Vec3, field: &FieldSpec, moment: f64) -> Vec3 {
    force_for(mu.dot(field.direction), field, moment)
}

/// The magnetic force for a given spin propensity.
pub fn force_for(m: f64, field: &FieldSpec, moment: f64) -> Vec3 {
    field.gradient_direction * (-moment * field.gradient * m)
}

/// alpha^2 = (|v|^2 - jump)/|v|^2 for an energy jump `jump` = mu_M B_M (s - M).
pub fn reset_alpha_sq(propensity: Vec3, jump: f64) -> Result<f64> {
    let e = propensity.norm_sq();
    if e == 0.0 {
        return Err(Error::ForbiddenReset { alpha_sq: f64::NAN });
    }
    let alpha_sq = (e - jump) / e;
    if alpha_sq < 0.0 {
        return Err(Error::ForbiddenReset { alpha_sq });
    }
    Ok(alpha_sq)
}

/// v' = alpha v + (1 - alpha) nu (v . nu): scales the part of v orthogonal to nu.
pub fn rescale_propensity(v: Vec3, alpha: f64, nu: Vec3) -> Vec3 {
    v * alpha + nu * ((1.0 - alpha) * v.dot(nu))
}

/// Outcome of a spin External Reset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinReset {
    pub alpha: f64,
    /// Polarization after the reset, s lambda.
    pub mu: Vec3,
    /// Rescaled propensity.
    pub propensity: Vec3,
}

/// The spin part of an External Reset: mu <- s lambda and the energy-compensating
/// rescale of the propensity. `m_eff` is the spin propensity entering the energy jump
/// (M for a lone particle, M~ for an entangled one).
pub fn spin_external_reset(
    spin: f64,
    m_eff: f64,
    propensity: Vec3,
    field: &FieldSpec,
    moment: f64,
) -> Result<SpinReset> {
    let alpha_sq = reset_alpha_sq(propensity, moment * field.magnitude * (spin - m_eff))?;
    let alpha = alpha_sq.sqrt();
    Ok(SpinReset {
        alpha,
        mu: field.direction * spin,
        propensity: rescale_propensity(propensity, alpha, field.gradient_direction),
    })
}

/// chi = (sqrt((1 + mu3)/2), (mu1 - i mu2)/sqrt(2(1 + mu3))); (0, 1) at the south pole.
/// This is the complex conjugate of the textbook Bloch spinor; the inverse below matches it.
pub fn spinor_from_polarization(mu: Vec3) -> Result<[Complex64; 2]> {
    let n = mu.norm_sq();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { norm_sq: n });
    }
    let up = 1.0 + mu[2];
    if up <= 1e-300 {
        return Ok([Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
    }
    let a = (up / 2.0).sqrt();
    let b = Complex64::new(mu[0], -mu[1]) / (2.0 * up).sqrt();
    Ok([Complex64::new(a, 0.0), b])
}

/// mu3 = |chi1|^2 - |chi2|^2, mu1 = 2 Re(chi1 chi2*), mu2 = 2 Im(chi1 chi2*).
/// A non-unit spinor is normalized first when `normalize` is set, rejected otherwise.
pub fn polarization_from_spinor(chi: [Complex64; 2], normalize: bool) -> Result<Vec3> {
    let n = chi[0].norm_sqr() + chi[1].norm_sqr();
    let chi = if (n - 1.0).abs() > 1e-9 {
        if !normalize || n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized { norm_sq: n });
        }
        let k = 1.0 / n.sqrt();
        [chi[0] * k, chi[1] * k]
    } else {
        chi
    };
    let c = chi[0] * chi[1].conj();
    Ok(Vec3::new(
        2.0 * c.re,
        2.0 * c.im,
        chi[0].norm_sqr() - chi[1].norm_sqr(),
    ))
}

fn cosine(a: Vec3, b: Vec3) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0)
}

/// (P(+1), P(-1)) = ((1 + cos)/2, (1 - cos)/2) for the angle between mu0 and lambda.
pub fn analytic_spin_pmf(mu0: Vec3, lambda: Vec3) -> (f64, f64) {
    let c = cosine(mu0, lambda);
    ((1.0 + c) / 2.0, (1.0 - c) / 2.0)
}

/// (P(s2 = +1 | s1), P(s2 = -1 | s1)) = (1 +- s1 cos)/2 behind two aligned analyzers.
pub fn cascade_pmf(lambda1: Vec3, lambda2: Vec3, s1: f64) -> (f64, f64) {
    let c = cosine(lambda1, lambda2);
    ((1.0 + s1 * c) / 2.0, (1.0 - s1 * c) / 2.0)
}
