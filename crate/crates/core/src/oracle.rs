//! Quantum-mechanical reference results: Gaussian-wave sources, the two-component
//! Stern-Gerlach propagator, spin densities, rotation-matrix pmfs and distribution metrics.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::factorial::{binomial, factorial};

use crate::error::{Error, Result};
use crate::types::{PairMode, Source, SourceEnsemble, SpinNumber};
use crate::vec3::Vec3;

/// `ns` adjacent sources centred on the origin along `axis`, with binomial weights
/// C(ns-1, k)/2^(ns-1) and phases eps_d = m_d x. The weight variance is (ns-1)/4.
pub fn gaussian_source(ns: usize, axis: usize, m: Vec3) -> Result<SourceEnsemble> {
    if ns == 0 || ns % 2 == 0 {
        return Err(Error::config("ns", format!("{ns} sources cannot be centred; use an odd count")));
    }
    if axis > 2 {
        return Err(Error::config("axis", "must be 0, 1 or 2"));
    }
    let n = (ns - 1) as u64;
    let half = (ns / 2) as i64;
    let scale = 0.5f64.powi(n as i32);
    let sources = (0..ns as u64)
        .map(|k| {
            let x = k as i64 - half;
            let mut position = [0; 3];
            position[axis] = x;
            Source {
                position,
                probability: binomial(n, k) * scale,
                phase: m * x as f64,
            }
        })
        .collect();
    SourceEnsemble::new(sources, PairMode::Single)
}

pub type Spinor = [Complex64; 2];

/// Source amplitudes on a line: positions along the inhomogeneity axis and spinors.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorPacket {
    pub positions: Vec<f64>,
    pub amplitudes: Vec<Spinor>,
}

impl SpinorPacket {
    /// Amplitude sqrt(P0) exp(i pi eps) chi at each source of `ens`, read along `axis`.
    pub fn from_ensemble(ens: &SourceEnsemble, axis: usize, chi: Spinor) -> Result<Self> {
        let n = chi[0].norm_sqr() + chi[1].norm_sqr();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized { norm_sq: n });
        }
        let mut positions = Vec::new();
        let mut amplitudes = Vec::new();
        for s in ens.sources() {
            let a = Complex64::from_polar(s.probability.sqrt(), PI * s.total_phase());
            positions.push(s.position[axis] as f64);
            amplitudes.push([chi[0] * a, chi[1] * a]);
        }
        Ok(SpinorPacket { positions, amplitudes })
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|c| c[0].norm_sqr() + c[1].norm_sqr()).sum()
    }
}

/// A spinor sampled on grid points along the inhomogeneity axis at lifetime `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorField {
    pub grid: Vec<f64>,
    pub chi: Vec<Spinor>,
    pub t: f64,
}

impl SpinorField {
    pub fn norm_sq(&self) -> f64 {
        self.chi.iter().map(|c| c[0].norm_sqr() + c[1].norm_sqr()).sum()
    }
}

/// Propagates `packet` for `t` iterations under a field whose force parameter is `phi`
/// (spin-up acceleration along the axis), summing the kernel directly over sources:
/// K = (2it)^(-1/2) exp(i pi (x-x0)^2/(2t) + i pi (x+x0) sigma3 phi t/2 - i pi phi^2 t^3/24).
///
/// On a window of 2t consecutive integer nodes the result has exactly the packet's norm.
pub fn sg_propagate(packet: &SpinorPacket, t: f64, phi: f64, grid: &[f64]) -> Result<SpinorField> {
    let n = packet.norm_sq();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { norm_sq: n });
    }
    if !(t > 0.0) {
        return Err(Error::config("t", "propagation time must be positive"));
    }
    let prefactor = Complex64::new(0.0, 2.0 * t).sqrt().inv();
    let global = -PI * phi * phi * t.powi(3) / 24.0;
    let chi = grid
        .iter()
        .map(|&x| {
            let mut out = [Complex64::new(0.0, 0.0); 2];
            for (x0, a) in packet.positions.iter().zip(&packet.amplitudes) {
                let free = PI * (x - x0) * (x - x0) / (2.0 * t) + global;
                let tilt = PI * (x + x0) * phi * t / 2.0;
                out[0] += a[0] * Complex64::from_polar(1.0, free + tilt);
                out[1] += a[1] * Complex64::from_polar(1.0, free - tilt);
            }
            [out[0] * prefactor, out[1] * prefactor]
        })
        .collect();
    Ok(SpinorField {
        grid: grid.to_vec(),
        chi,
        t,
    })
}

/// (rho, <S3>) = (chi^dagger chi, chi^dagger sigma3 chi) at every grid point.
pub fn densities_from_spinor(field: &SpinorField) -> (Vec<f64>, Vec<f64>) {
    field
        .chi
        .iter()
        .map(|c| (c[0].norm_sqr() + c[1].norm_sqr(), c[0].norm_sqr() - c[1].norm_sqr()))
        .unzip()
}

/// Wigner small-d element d^j_{m'm}(theta) with all of j, m', m given doubled.
fn wigner_small_d(j2: i64, mp2: i64, m2: i64, theta: f64) -> f64 {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let jm = (j2 + m2) / 2;
    let jmm = (j2 - m2) / 2;
    let jmp = (j2 + mp2) / 2;
    let jmpm = (j2 - mp2) / 2;
    let diff = (mp2 - m2) / 2;
    let f = |n: i64| factorial(n as u64);
    let norm = (f(jm) * f(jmm) * f(jmp) * f(jmpm)).sqrt();
    let mut sum = 0.0;
    for k in 0.max(-diff)..=jm.min(jmpm) {
        let denom = f(jm - k) * f(k) * f(jmpm - k) * f(k + diff);
        let sign = if (k + diff) % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * norm / denom * c.powi((j2 - 2 * k - diff) as i32) * s.powi((2 * k + diff) as i32);
    }
    sum
}

/// |d^S_{m'm}(theta)|^2 over m' in ascending grid order, with cos theta = `y` and m = S s1.
pub fn wigner_reference(number: SpinNumber, y: f64, s1: f64) -> Result<Vec<f64>> {
    if !(y.abs() <= 1.0) {
        return Err(Error::config("Y", "cosine must lie in [-1, 1]"));
    }
    let k1 = number
        .grid_index(s1)
        .ok_or_else(|| Error::config("s1", format!("{s1} is not on the spin grid")))?;
    let j2 = i64::from(number.twice());
    let m2 = 2 * k1 as i64 - j2;
    let theta = y.acos();
    Ok((0..number.grid_len())
        .map(|k| {
            let mp2 = 2 * k as i64 - j2;
            wigner_small_d(j2, mp2, m2, theta).powi(2)
        })
        .collect())
}

/// Agreement between an empirical histogram and a reference distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub total_variation: f64,
    /// Pearson statistic sum (O - E)^2 / E over bins with E > 0; infinite if counts fall
    /// where the reference has no mass.
    pub chi_square: f64,
    pub max_abs: f64,
    pub samples: f64,
}

/// Compares counts against reference weights on the same bins. Both are normalized first.
pub fn compare_distributions(counts: &[f64], reference: &[f64]) -> Result<Comparison> {
    if counts.len() != reference.len() {
        return Err(Error::BinMismatch {
            left: counts.len(),
            right: reference.len(),
        });
    }
    let n: f64 = counts.iter().sum();
    let r: f64 = reference.iter().sum();
    if !(r > 0.0) || counts.iter().chain(reference).any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::NotNormalized { norm_sq: r });
    }
    let mut out = Comparison {
        samples: n,
        ..Comparison::default()
    };
    for (o, e) in counts.iter().zip(reference) {
        let p = if n > 0.0 { o / n } else { 0.0 };
        let q = e / r;
        let d = (p - q).abs();
        out.total_variation += d / 2.0;
        out.max_abs = out.max_abs.max(d);
        let expected = n * q;
        if expected > 0.0 {
            out.chi_square += (o - expected).powi(2) / expected;
        } else if *o > 0.0 {
            out.chi_square = f64::INFINITY;
        }
    }
    Ok(out)
}

/// Upper critical value of the chi-square distribution at significance `alpha`.
pub fn chi_square_critical(dof: usize, alpha: f64) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use super::*;

    #[test]
    fn gaussian_source_examples() {
        let one = gaussian_source(1, 0, Vec3::ZERO).unwrap();
        assert_eq!(one.sources().len(), 1);
        assert_eq!(one.sources()[0].probability, 1.0);
        let five = gaussian_source(5, 2, Vec3::ZERO).unwrap();
        let w: Vec<f64> = five.sources().iter().map(|s| s.probability * 16.0).collect();
        assert_eq!(w, vec![1.0, 4.0, 6.0, 4.0, 1.0]);
        assert_eq!(five.sources()[0].position, [0, 0, -2]);
        let nine = gaussian_source(9, 0, Vec3::ZERO).unwrap();
        let var: f64 = nine
            .sources()
            .iter()
            .map(|s| s.probability * (s.position[0] as f64).powi(2))
            .sum();
        assert!((var - 2.0).abs() < 1e-12);
        assert!(gaussian_source(4, 0, Vec3::ZERO).is_err());
    }

    #[test]
    fn density_examples() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let f = SpinorField {
            grid: vec![0.0, 1.0],
            chi: vec![[one, zero], [h, h]],
            t: 1.0,
        };
        let (rho, s3) = densities_from_spinor(&f);
        assert_eq!(rho[0], s3[0]);
        assert!(s3[1].abs() < 1e-15);
    }

    #[test]
    fn wigner_examples() {
        for y in [-1.0, -0.3, 0.0, 0.5, 1.0] {
            let r = wigner_reference(SpinNumber::HALF, y, 1.0).unwrap();
            assert!((r[1] - (1.0 + y) / 2.0).abs() < 1e-14);
            assert!((r[0] - (1.0 - y) / 2.0).abs() < 1e-14);
            let r = wigner_reference(SpinNumber::ONE, y, 0.0).unwrap();
            assert!((r[1] - y * y).abs() < 1e-14);
        }
        assert_eq!(wigner_reference(SpinNumber::ONE, 1.0, -1.0).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(wigner_reference(SpinNumber::ONE, 0.5, 0.5).is_err());
    }

    #[test]
    fn comparison_examples() {
        let c = compare_distributions(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((c.total_variation, c.chi_square, c.max_abs), (0.0, 0.0, 0.0));
        let c = compare_distributions(&[5.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(c.total_variation, 1.0);
        assert!(compare_distributions(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn chi_square_table_value() {
        assert!((chi_square_critical(15, 0.01) - 30.578).abs() < 1e-3);
    }
}
