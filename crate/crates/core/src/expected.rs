//! Expected-motion kinematics: closed-form positions, the interference correction to the
//! propensity, and the position and momentum densities it implies.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::SourceEnsemble;
use crate::vec3::Vec3;

/// Motion under a quadratic potential along one axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kinematics {
    #[default]
    Free,
    FreeFall {
        force: f64,
    },
    Harmonic {
        omega: f64,
    },
}

/// x = A x0 + B v + C at a given lifetime.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KinematicCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Kinematics {
    pub fn coeffs(self, t: f64) -> KinematicCoeffs {
        match self {
            Kinematics::Free => KinematicCoeffs { a: 1.0, b: t, c: 0.0 },
            Kinematics::FreeFall { force } => KinematicCoeffs {
                a: 1.0,
                b: t,
                c: force * t * t / 2.0,
            },
            Kinematics::Harmonic { omega } => KinematicCoeffs {
                a: (omega * t).cos(),
                b: if omega == 0.0 { t } else { (omega * t).sin() / omega },
                c: 0.0,
            },
        }
    }
}

/// Per-axis kinematics plus the set of axes that take part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Motion {
    pub axes: [Kinematics; 3],
    pub active: [bool; 3],
}

impl Default for Motion {
    fn default() -> Self {
        Motion {
            axes: [Kinematics::Free; 3],
            active: [true; 3],
        }
    }
}

/// Below this |B| the expected-motion map is treated as singular.
const SINGULAR_B: f64 = 1e-12;

impl Motion {
    /// Free motion along a single axis.
    pub fn along(axis: usize, kind: Kinematics) -> Self {
        let mut m = Motion {
            axes: [Kinematics::Free; 3],
            active: [false; 3],
        };
        m.axes[axis] = kind;
        m.active[axis] = true;
        m
    }

    pub fn coeffs(&self, t: f64) -> [KinematicCoeffs; 3] {
        [0, 1, 2].map(|d| self.axes[d].coeffs(t))
    }

    fn checked_coeffs(&self, t: f64) -> Result<[KinematicCoeffs; 3]> {
        let c = self.coeffs(t);
        for d in 0..3 {
            if self.active[d] && c[d].b.abs() < SINGULAR_B {
                return Err(Error::SingularTime { t });
            }
        }
        Ok(c)
    }

    fn active_axes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..3).filter(|d| self.active[*d])
    }
}

/// x_d = A_d x0_d + B_d vQ_d + C_d on every axis.
pub fn expected_position(x0: Vec3, vq: Vec3, motion: &Motion, t: f64) -> Vec3 {
    let k = motion.coeffs(t);
    Vec3([0, 1, 2].map(|d| k[d].a * x0[d] + k[d].b * vq[d] + k[d].c))
}

/// Iterates over ordered source pairs i != j with a non-zero joint weight, yielding
/// (sqrt(Pi Pj), signed separation xi - xj, midpoint, phase difference).
fn pairs(ens: &SourceEnsemble) -> impl Iterator<Item = (f64, Vec3, Vec3, f64)> + '_ {
    let s = ens.sources();
    (0..s.len()).flat_map(move |i| {
        (0..s.len()).filter_map(move |j| {
            if i == j {
                return None;
            }
            let w = (s[i].probability * s[j].probability).sqrt();
            if w == 0.0 {
                return None;
            }
            let xi = Vec3::from_ints(s[i].position);
            let xj = Vec3::from_ints(s[j].position);
            Some((w, xi - xj, (xi + xj) * 0.5, s[i].total_phase() - s[j].total_phase()))
        })
    })
}

fn position_arg(x: Vec3, delta: Vec3, mid: Vec3, eps: f64, k: &[KinematicCoeffs; 3], motion: &Motion) -> f64 {
    let mut arg = 0.0;
    for d in motion.active_axes() {
        arg += delta[d] * (x[d] - k[d].a * mid[d] - k[d].c) / k[d].b;
    }
    PI * (arg - eps)
}

/// The interference correction G with vQ = v0 - G:
/// G_d = rho_d * sum_{i != j} sqrt(Pi Pj) sin(arg_ij) / (pi * sum_d rho_d delta_d).
/// Pairs whose separation is orthogonal to rho contribute nothing.
pub fn interference_term(x: Vec3, t: f64, ens: &SourceEnsemble, rho: Vec3, motion: &Motion) -> Result<Vec3> {
    let k = motion.checked_coeffs(t)?;
    let mut sum = 0.0;
    let mut terms = Vec3::ZERO;
    for (w, delta, mid, eps) in pairs(ens) {
        let proj: f64 = motion.active_axes().map(|d| rho[d] * delta[d]).sum();
        if proj == 0.0 {
            continue;
        }
        let s = w * position_arg(x, delta, mid, eps, &k, motion).sin() / (PI * proj);
        sum += s;
    }
    for d in motion.active_axes() {
        terms[d] = rho[d] * sum;
    }
    Ok(terms)
}

/// The quantum momentum at `x` for a particle with source momentum `v0`.
pub fn quantum_propensity(
    x: Vec3,
    t: f64,
    ens: &SourceEnsemble,
    rho: Vec3,
    motion: &Motion,
    v0: Vec3,
) -> Result<Vec3> {
    Ok(v0 - interference_term(x, t, ens, rho, motion)?)
}

/// Joint position density (1 + sum_{i != j} sqrt(Pi Pj) cos(arg_ij)) / prod_d 2|B_d|
/// over the active axes. The expression repeats with period 2|B_d|; it is a density on the
/// window of that width around the transported ensemble centre, not beyond it.
pub fn position_pdf(x: Vec3, t: f64, ens: &SourceEnsemble, motion: &Motion) -> Result<f64> {
    let k = motion.checked_coeffs(t)?;
    let mut sum = 1.0;
    for (w, delta, mid, eps) in pairs(ens) {
        sum += w * position_arg(x, delta, mid, eps, &k, motion).cos();
    }
    let volume: f64 = motion.active_axes().map(|d| 2.0 * k[d].b.abs()).product();
    Ok(sum / volume)
}

/// Joint momentum density on [-1, 1]^n over the active axes:
/// (1 + sum_{i != j} sqrt(Pi Pj) cos(pi delta.v - pi eps_ij)) / 2^n.
pub fn momentum_pdf(v: Vec3, ens: &SourceEnsemble, active: [bool; 3]) -> f64 {
    let axes: Vec<usize> = (0..3).filter(|d| active[*d]).collect();
    let mut sum = 1.0;
    for (w, delta, _, eps) in pairs(ens) {
        let phase: f64 = axes.iter().map(|d| delta[*d] * v[*d]).sum();
        sum += w * (PI * (phase - eps)).cos();
    }
    sum / 2f64.powi(axes.len() as i32)
}

/// Bisection on a non-decreasing function known to change sign on [lo, hi].
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    const SLACK: f64 = 1e-9;
    let (flo, fhi) = (f(lo), f(hi));
    if flo > SLACK || fhi < -SLACK {
        return Err(Error::Solver(format!("root not bracketed on [{lo}, {hi}]")));
    }
    if flo >= 0.0 {
        return Ok(lo);
    }
    if fhi <= 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo < 1e-11 * lo.abs().max(1.0) {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn single_axis(motion: &Motion) -> Result<usize> {
    let axes: Vec<usize> = motion.active_axes().collect();
    match axes.as_slice() {
        [a] => Ok(*a),
        _ => Err(Error::Unsupported(
            "the implicit position solve needs exactly one active axis".into(),
        )),
    }
}

/// Bound on |G| over all positions: sum of sqrt(Pi Pj) / (pi |delta_ij|) along `axis`.
fn interference_bound(ens: &SourceEnsemble, axis: usize) -> f64 {
    pairs(ens)
        .filter(|(_, d, _, _)| d[axis] != 0.0)
        .map(|(w, d, _, _)| w / (PI * d[axis].abs()))
        .sum()
}

/// Final position of a particle from source position `x0` with source momentum `v0`:
/// the root of x = A x0 + B (v0 - G(x)) + C on the single active axis. The left side
/// minus the right is non-decreasing whenever the position density is non-negative,
/// so a bracketed bisection always converges.
pub fn solve_position(x0: Vec3, v0: Vec3, t: f64, ens: &SourceEnsemble, rho: Vec3, motion: &Motion) -> Result<Vec3> {
    let axis = single_axis(motion)?;
    let k = motion.checked_coeffs(t)?[axis];
    let free = k.a * x0[axis] + k.b * v0[axis] + k.c;
    let span = k.b.abs() * interference_bound(ens, axis) * rho[axis].abs().max(1.0) + 1e-9;
    let mut x = Vec3::ZERO;
    let h = |y: f64| {
        let mut probe = x0;
        probe[axis] = y;
        let g = interference_term(probe, t, ens, rho, motion).map(|g| g[axis]).unwrap_or(0.0);
        y - free + k.b * g
    };
    let root = if k.b > 0.0 {
        bisect(free - span, free + span, h)?
    } else {
        bisect(free - span, free + span, |y| -h(y))?
    };
    x[axis] = root;
    for d in 0..3 {
        if d != axis {
            x[d] = x0[d];
        }
    }
    Ok(x)
}

/// Momentum with density `momentum_pdf` along `axis`, from a uniform draw `u` in [-1, 1].
/// Inverse CDF: u = v + G(v) - G(-1) with G(v) = sum sqrt(Pi Pj) sin(pi delta v - pi eps)/(pi delta).
pub fn far_field_momentum(u: f64, ens: &SourceEnsemble, axis: usize) -> Result<f64> {
    let terms: Vec<(f64, f64, f64)> = pairs(ens)
        .filter(|(_, d, _, _)| d[axis] != 0.0)
        .map(|(w, d, _, eps)| (w, d[axis], eps))
        .collect();
    let g = |v: f64| -> f64 {
        terms
            .iter()
            .map(|(w, d, eps)| w * (PI * (d * v - eps)).sin() / (PI * d))
            .sum()
    };
    let offset = g(-1.0);
    bisect(-1.0, 1.0, |v| v + g(v) - offset - u)
}

/// First-order lag y <- y + (u - y)/tau, starting from the first input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagFilter {
    tau: f64,
    state: Option<Vec3>,
}

impl LagFilter {
    /// Default time constant in iterations.
    pub const DEFAULT_TAU: f64 = 8.0;

    pub fn new(tau: f64) -> Result<Self> {
        if !(tau >= 1.0 && tau.is_finite()) {
            return Err(Error::config("filter_tau", "time constant must be finite and >= 1"));
        }
        Ok(LagFilter { tau, state: None })
    }

    pub fn push(&mut self, u: Vec3) -> Vec3 {
        let y = match self.state {
            None => u,
            Some(y) => y + (u - y) * (1.0 / self.tau),
        };
        self.state = Some(y);
        y
    }
}

/// Expected positions at lifetimes 1..=steps. The interference correction is evaluated
/// at the previous position and passed through a lag filter before it moves the particle.
pub fn integrate_trajectory(
    x0: Vec3,
    v0: Vec3,
    ens: &SourceEnsemble,
    rho: Vec3,
    motion: &Motion,
    steps: u64,
    tau: f64,
) -> Result<Vec<Vec3>> {
    let mut filter = LagFilter::new(tau)?;
    let mut out = Vec::with_capacity(steps as usize);
    let mut x = x0;
    for n in 1..=steps {
        let t = n as f64;
        let g = filter.push(interference_term(x, t, ens, rho, motion)?);
        x = expected_position(x0, v0 - g, motion, t);
        for d in 0..3 {
            if !motion.active[d] {
                x[d] = x0[d];
            }
        }
        out.push(x);
    }
    Ok(out)
}
