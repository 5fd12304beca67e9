//! Shared domain types.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// A node of the space-time lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeCoord {
    pub x: [i64; 3],
    pub n: u64,
}

/// Spin number S, stored as the integer 2S so half-integers stay exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SpinNumber(u32);

impl SpinNumber {
    pub const HALF: SpinNumber = SpinNumber(1);
    pub const ONE: SpinNumber = SpinNumber(2);

    /// Builds S from 2S. Zero is rejected: a spinless particle has no spin number here.
    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::config("S", "spin number must be positive"));
        }
        Ok(SpinNumber(twice))
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    /// Number of grid points, 2S + 1.
    pub fn grid_len(self) -> usize {
        self.0 as usize + 1
    }

    /// The k-th spin value, ascending from -1: -1 + k/S.
    pub fn grid_value(self, k: usize) -> f64 {
        -1.0 + 2.0 * k as f64 / f64::from(self.0)
    }

    pub fn grid(self) -> Vec<f64> {
        (0..self.grid_len()).map(|k| self.grid_value(k)).collect()
    }

    /// Index of a grid value, if `s` sits on the grid.
    pub fn grid_index(self, s: f64) -> Option<usize> {
        let k = (s + 1.0) * f64::from(self.0) / 2.0;
        let r = k.round();
        ((k - r).abs() < 1e-9 && r >= 0.0 && r <= f64::from(self.0)).then_some(r as usize)
    }

    /// (S + 1)/S, the squared-polarization budget shared by mu and tau.
    pub fn budget(self) -> f64 {
        (self.value() + 1.0) / self.value()
    }
}

impl TryFrom<f64> for SpinNumber {
    type Error = Error;
    fn try_from(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !(twice >= 1.0) || twice.fract() != 0.0 || twice > 1e6 {
            return Err(Error::config("S", format!("{s} is not a positive half-integer")));
        }
        SpinNumber::from_twice(twice as u32)
    }
}

impl From<SpinNumber> for f64 {
    fn from(s: SpinNumber) -> f64 {
        s.value()
    }
}

/// One point source of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub position: [i64; 3],
    pub probability: f64,
    #[serde(default)]
    pub phase: Vec3,
}

impl Source {
    /// Scalar phase carried by particles emitted here: the sum of the per-axis phases.
    pub fn total_phase(&self) -> f64 {
        self.phase.0.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    #[default]
    Single,
    Entangled,
}

/// Where and with what weight particles are emitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnsemble")]
pub struct SourceEnsemble {
    sources: Vec<Source>,
    pair_mode: PairMode,
}

#[derive(Deserialize)]
struct RawEnsemble {
    sources: Vec<Source>,
    #[serde(default)]
    pair_mode: PairMode,
}

impl TryFrom<RawEnsemble> for SourceEnsemble {
    type Error = Error;
    fn try_from(raw: RawEnsemble) -> Result<Self> {
        SourceEnsemble::new(raw.sources, raw.pair_mode)
    }
}

/// Weights may be off from one by accumulated rounding, never by more.
const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;

impl SourceEnsemble {
    pub fn new(sources: Vec<Source>, pair_mode: PairMode) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::config("ensemble.sources", "at least one source is required"));
        }
        for (i, s) in sources.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.probability) {
                return Err(Error::config(
                    format!("ensemble.sources[{i}].probability"),
                    format!("{} is outside [0, 1]", s.probability),
                ));
            }
            if !s.phase.is_finite() {
                return Err(Error::config(format!("ensemble.sources[{i}].phase"), "not finite"));
            }
        }
        let total: f64 = sources.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(Error::config(
                "ensemble.sources",
                format!("probabilities sum to {total}, not 1"),
            ));
        }
        Ok(SourceEnsemble { sources, pair_mode })
    }

    /// A single source at `position` with weight one.
    pub fn point(position: [i64; 3]) -> Self {
        SourceEnsemble {
            sources: vec![Source {
                position,
                probability: 1.0,
                phase: Vec3::ZERO,
            }],
            pair_mode: PairMode::Single,
        }
    }

    pub fn with_pair_mode(mut self, pair_mode: PairMode) -> Self {
        self.pair_mode = pair_mode;
        self
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn pair_mode(&self) -> PairMode {
        self.pair_mode
    }

    /// Source index selected by a uniform draw `u` in [0, 1).
    pub fn pick(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, s) in self.sources.iter().enumerate() {
            acc += s.probability;
            if u < acc {
                return i;
            }
        }
        // u landed in the rounding gap above the last partial sum.
        self.sources
            .iter()
            .rposition(|s| s.probability > 0.0)
            .unwrap_or(self.sources.len() - 1)
    }
}

/// Extent of a field along one axis. Positions are compared as reals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub axis: usize,
    pub start: f64,
    pub end: f64,
}

impl Region {
    /// The whole lattice.
    pub const EVERYWHERE: Region = Region {
        axis: 0,
        start: f64::NEG_INFINITY,
        end: f64::INFINITY,
    };

    pub fn contains(&self, x: [i64; 3]) -> bool {
        let c = x[self.axis] as f64;
        c >= self.start && c < self.end
    }
}

impl Default for Region {
    fn default() -> Self {
        Region::EVERYWHERE
    }
}

/// A magnetic field: direction, magnitude, gradient and the region it fills.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldSpec {
    pub direction: Vec3,
    pub magnitude: f64,
    pub gradient: f64,
    pub gradient_direction: Vec3,
    pub region: Region,
}

#[derive(Deserialize)]
struct RawField {
    direction: Vec3,
    #[serde(default)]
    magnitude: f64,
    #[serde(default)]
    gradient: f64,
    gradient_direction: Option<Vec3>,
    #[serde(default)]
    region: Region,
}

impl<'de> Deserialize<'de> for FieldSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawField::deserialize(d)?;
        FieldSpec::new(
            raw.direction,
            raw.magnitude,
            raw.gradient,
            raw.gradient_direction.unwrap_or(raw.direction),
            raw.region,
        )
        .map_err(serde::de::Error::custom)
    }
}

impl FieldSpec {
    /// Directions are normalized here so the unit-norm invariants hold by construction.
    pub fn new(
        direction: Vec3,
        magnitude: f64,
        gradient: f64,
        gradient_direction: Vec3,
        region: Region,
    ) -> Result<Self> {
        let direction = direction
            .normalized()
            .ok_or_else(|| Error::config("field.direction", "must be non-zero"))?;
        let gradient_direction = gradient_direction
            .normalized()
            .ok_or_else(|| Error::config("field.gradient_direction", "must be non-zero"))?;
        if !(magnitude >= 0.0 && magnitude.is_finite()) {
            return Err(Error::config("field.magnitude", "must be finite and >= 0"));
        }
        if !(gradient >= 0.0 && gradient.is_finite()) {
            return Err(Error::config("field.gradient", "must be finite and >= 0"));
        }
        if region.axis > 2 {
            return Err(Error::config("field.region.axis", "must be 0, 1 or 2"));
        }
        Ok(FieldSpec {
            direction,
            magnitude,
            gradient,
            gradient_direction,
            region,
        })
    }

    /// A homogeneous field filling the lattice, with gradient along the field.
    pub fn homogeneous(direction: Vec3, magnitude: f64) -> Result<Self> {
        FieldSpec::new(direction, magnitude, 0.0, direction, Region::EVERYWHERE)
    }

    /// A Stern-Gerlach field: gradient along the field direction.
    pub fn stern_gerlach(direction: Vec3, magnitude: f64, gradient: f64) -> Result<Self> {
        FieldSpec::new(direction, magnitude, gradient, direction, Region::EVERYWHERE)
    }
}

/// A boson held by a particle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleBoson {
    pub momentum: f64,
    pub lifetime: u64,
}

/// Exchange label of a boson: the span and trace that met in a Quantum Reset.
pub type ExchangeLabel = ([i64; 3], [i64; 3]);

/// Spin variables carried by a particle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinVars {
    pub number: SpinNumber,
    pub source_spin: f64,
    pub spin: f64,
    pub mu: Vec3,
    /// Second polarization; zero and unused for S = 1/2.
    pub tau: Vec3,
}

/// Everything a particle carries between iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub lifetime: u64,
    pub span: [i64; 3],
    pub position: [i64; 3],
    pub momentum: [i8; 3],
    pub propensity: Vec3,
    pub quantum_momentum: Vec3,
    pub force_momentum: Vec3,
    pub source_momentum: Vec3,
    pub momentum_polarization: Vec3,
    /// Scalar phase. Only phase differences enter the dynamics, and those are sums over axes.
    pub phase: f64,
    pub spin: Option<SpinVars>,
    pub bosons: BTreeMap<ExchangeLabel, ParticleBoson>,
}

impl ParticleState {
    /// A fresh particle at `position` with the given source momentum and momentum polarization.
    pub fn new(position: [i64; 3], source_momentum: Vec3, rho: Vec3, phase: f64) -> Self {
        ParticleState {
            lifetime: 0,
            span: [0; 3],
            position,
            momentum: [0; 3],
            propensity: source_momentum,
            quantum_momentum: source_momentum,
            force_momentum: Vec3::ZERO,
            source_momentum,
            momentum_polarization: rho,
            phase,
            spin: None,
            bosons: BTreeMap::new(),
        }
    }

    /// Sum of the held particle-boson momenta.
    pub fn boson_sum(&self) -> f64 {
        self.bosons.values().map(|b| b.momentum).sum()
    }
}
