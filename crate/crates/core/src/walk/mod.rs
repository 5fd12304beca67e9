//! The microscopic lattice walk: per-iteration counters, momentum sampling, boson decay,
//! Quantum Reset and External Reset against a shared, lazily populated lattice.

mod snapshot;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::emission::{prepare_emission, EmissionConfig};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::types::{ExchangeLabel, ParticleBoson, ParticleState, Region, SourceEnsemble};
use crate::vec3::Vec3;

pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC};

/// Probabilities of the three unit momenta along one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumPmf {
    pub minus: f64,
    pub zero: f64,
    pub plus: f64,
}

/// The momentum pmf for propensity `v`: e = (1 + v^2)/2, P(+-1) = (e +- v)/2, P(0) = 1 - e.
pub fn momentum_pmf(v: f64) -> Result<MomentumPmf> {
    if !(v.abs() <= 1.0) {
        return Err(Error::PropensityOverflow { value: v });
    }
    let e = (1.0 + v * v) / 2.0;
    Ok(MomentumPmf {
        minus: (e - v) / 2.0,
        zero: 1.0 - e,
        plus: (e + v) / 2.0,
    })
}

impl MomentumPmf {
    /// Inverse-CDF draw from a uniform `u` in [0, 1), in the order +1, -1, 0.
    pub fn sample(&self, u: f64) -> i8 {
        if u < self.plus {
            1
        } else if u < self.plus + self.minus {
            -1
        } else {
            0
        }
    }
}

/// A boson stored in a node. Its momentum decays geometrically from creation:
/// each global iteration multiplies it by 1 - (omega0/t)^2, where omega0 and t are
/// the momentum and lifetime at creation. A non-positive factor kills it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeBoson {
    pub momentum: f64,
    pub created_at: u64,
    pub lifetime: u64,
}

impl LatticeBoson {
    pub fn momentum_at(&self, n: u64) -> f64 {
        let elapsed = n.saturating_sub(self.created_at);
        if elapsed == 0 {
            return self.momentum;
        }
        let ratio = self.momentum / self.lifetime.max(1) as f64;
        let factor = 1.0 - ratio * ratio;
        if factor <= 0.0 {
            return 0.0;
        }
        let exp = i32::try_from(elapsed).unwrap_or(i32::MAX);
        self.momentum * factor.powi(exp)
    }
}

/// Memory held by one lattice node.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub span_trace: [i64; 3],
    pub phase_trace: f64,
    pub bosons: BTreeMap<ExchangeLabel, LatticeBoson>,
}

/// Nodes keyed by position and lifetime, created on first visit, plus a global clock
/// counting every iteration of every particle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lattice {
    nodes: HashMap<([i64; 3], u64), NodeState>,
    clock: u64,
}

impl Lattice {
    pub fn new() -> Self {
        Lattice::default()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, x: [i64; 3], t: u64) -> Option<&NodeState> {
        self.nodes.get(&(x, t))
    }

    pub fn node_mut(&mut self, x: [i64; 3], t: u64) -> &mut NodeState {
        self.nodes.entry((x, t)).or_default()
    }

    /// Nodes in key order, for reproducible serialization.
    pub fn sorted_nodes(&self) -> Vec<(&([i64; 3], u64), &NodeState)> {
        let mut v: Vec<_> = self.nodes.iter().collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }

    pub(crate) fn from_parts(nodes: HashMap<([i64; 3], u64), NodeState>, clock: u64) -> Self {
        Lattice { nodes, clock }
    }
}

/// Source of force bosons and of any internal (spin) dynamics tied to the field.
pub trait ExternalField {
    /// Runs before the propensity is read each step.
    fn evolve<R: Rng + ?Sized>(&self, _p: &mut ParticleState, _rng: &mut R) -> Result<()> {
        Ok(())
    }

    /// Force boson captured at the particle's landing node at global iteration `n`,
    /// after any internal reset the capture causes.
    fn capture<R: Rng + ?Sized>(&self, p: &mut ParticleState, n: u64, rng: &mut R) -> Result<Capture>;
}

/// Result of a force-boson capture check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Capture {
    None,
    Boson(Vec3),
    /// A boson was present but the reset was energetically forbidden; the particle moves on.
    Forbidden,
}

/// No external force anywhere.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoField;

impl ExternalField for NoField {
    fn capture<R: Rng + ?Sized>(&self, _: &mut ParticleState, _: u64, _: &mut R) -> Result<Capture> {
        Ok(Capture::None)
    }
}

/// A constant force boson at every node of a region.
#[derive(Clone, Copy, Debug)]
pub struct UniformForce {
    pub force: Vec3,
    pub region: Region,
}

impl ExternalField for UniformForce {
    fn capture<R: Rng + ?Sized>(&self, p: &mut ParticleState, _: u64, _: &mut R) -> Result<Capture> {
        Ok(if self.region.contains(p.position) {
            Capture::Boson(self.force)
        } else {
            Capture::None
        })
    }
}

/// What an External Reset does with the accumulated force momentum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceAccounting {
    /// The reset starts a new emission: v0 takes the full propensity, then the force
    /// sum and the particle bosons are cleared so nothing is counted twice.
    #[default]
    Fold,
    /// v_F keeps accumulating across resets and v0 <- propensity as written.
    /// The force then enters the propensity twice after the first reset.
    Accumulate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Axes the particle may move along; inactive axes never change.
    pub active: [bool; 3],
    #[serde(default)]
    pub force_accounting: ForceAccounting,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            active: [true; 3],
            force_accounting: ForceAccounting::Fold,
        }
    }
}

impl WalkConfig {
    pub fn one_dimensional(axis: usize) -> Self {
        let mut active = [false; 3];
        active[axis] = true;
        WalkConfig {
            active,
            ..WalkConfig::default()
        }
    }
}

/// Exchanges that fired during one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepEvents {
    pub external_reset: bool,
    pub forbidden_reset: bool,
    pub quantum_reset: bool,
}

/// v_Q = v0 - rho_d^2 * (sum of particle-boson momenta).
pub fn quantum_momentum(p: &ParticleState) -> Vec3 {
    let w = p.boson_sum();
    let rho = p.momentum_polarization;
    let mut vq = p.source_momentum;
    for d in 0..3 {
        vq[d] -= rho[d] * rho[d] * w;
    }
    vq
}

/// Refreshes v_Q and the propensity from the particle's counters.
pub fn refresh_propensity(p: &mut ParticleState) {
    p.quantum_momentum = quantum_momentum(p);
    p.propensity = p.quantum_momentum + p.force_momentum;
}

/// Halves-at-unit-lifetime decay of every particle boson: w <- w (1 - 1/(2 t_w)).
pub fn decay_particle_bosons(p: &mut ParticleState) {
    for b in p.bosons.values_mut() {
        b.momentum *= 1.0 - 1.0 / (2.0 * b.lifetime.max(1) as f64);
    }
}

/// One iteration: decay, field evolution, motion, force capture, then Quantum Reset.
pub fn step<F: ExternalField, R: Rng + ?Sized>(
    p: &mut ParticleState,
    lat: &mut Lattice,
    field: &F,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<StepEvents> {
    lat.clock += 1;
    p.lifetime += 1;
    decay_particle_bosons(p);
    field.evolve(p, rng)?;
    refresh_propensity(p);

    let mut pmfs = [None; 3];
    for d in 0..3 {
        if cfg.active[d] {
            pmfs[d] = Some(momentum_pmf(p.propensity[d])?);
        }
    }
    for d in 0..3 {
        let v = match pmfs[d] {
            Some(pmf) => pmf.sample(rng.random()),
            None => 0,
        };
        p.momentum[d] = v;
        p.span[d] += i64::from(v);
        p.position[d] += i64::from(v);
    }

    let mut events = StepEvents::default();
    match field.capture(p, lat.clock, rng)? {
        Capture::Boson(f) => events.external_reset = external_reset(p, f, cfg.force_accounting),
        Capture::Forbidden => events.forbidden_reset = true,
        Capture::None => {}
    }
    let clock = lat.clock;
    let node = lat.node_mut(p.position, p.lifetime);
    events.quantum_reset = quantum_reset(p, node, clock);
    Ok(events)
}

/// Exchange between a particle and the node it stands on. Fires iff the span differs
/// from the node's trace; returns whether it fired.
///
/// The particle receives the node's boson with the matching label, scaled by
/// 1/sum(rho_d^2 delta_d); the node stores a fresh boson of momentum
/// sum(delta_d vQ_d) minus the phase difference; then spans and phases are swapped.
/// A zero divisor skips the transfer but still swaps.
pub fn quantum_reset(p: &mut ParticleState, node: &mut NodeState, n: u64) -> bool {
    if p.span == node.span_trace {
        return false;
    }
    let label = (p.span, node.span_trace);
    let mut delta = [0.0; 3];
    for d in 0..3 {
        delta[d] = (p.span[d] - node.span_trace[d]).abs() as f64;
    }
    let rho = p.momentum_polarization;
    let divisor: f64 = (0..3).map(|d| rho[d] * rho[d] * delta[d]).sum();
    if divisor > 0.0 {
        if let Some(lb) = node.bosons.get(&label) {
            p.bosons.insert(
                label,
                ParticleBoson {
                    momentum: lb.momentum_at(n) / divisor,
                    lifetime: lb.lifetime.max(1),
                },
            );
        }
    }
    let vq = p.quantum_momentum;
    let omega: f64 = (0..3).map(|d| delta[d] * vq[d]).sum::<f64>() - (p.phase - node.phase_trace);
    node.bosons.insert(
        label,
        LatticeBoson {
            momentum: omega,
            created_at: n,
            lifetime: p.lifetime.max(1),
        },
    );
    std::mem::swap(&mut p.span, &mut node.span_trace);
    std::mem::swap(&mut p.phase, &mut node.phase_trace);
    true
}

/// Capture of a force boson `f`. Returns false (and does nothing) for f = 0.
///
/// The force joins v_F, v0 takes the propensity, the span is reflected across the plane
/// normal to `f` (rounded back onto the lattice for oblique forces) and the phase
/// advances by one.
pub fn external_reset(p: &mut ParticleState, f: Vec3, accounting: ForceAccounting) -> bool {
    let ff = f.norm_sq();
    if ff == 0.0 {
        return false;
    }
    p.force_momentum += f;
    p.quantum_momentum = quantum_momentum(p);
    p.propensity = p.quantum_momentum + p.force_momentum;
    p.source_momentum = p.propensity;
    if accounting == ForceAccounting::Fold {
        p.force_momentum = Vec3::ZERO;
        p.bosons.clear();
        p.quantum_momentum = p.source_momentum;
    }
    let span = Vec3::from_ints(p.span);
    let reflected = span - f * (2.0 * span.dot(f) / ff);
    for d in 0..3 {
        p.span[d] = reflected[d].round() as i64;
    }
    p.phase += 1.0;
    true
}

/// Position counts of particles after a fixed number of steps.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: BTreeMap<[i64; 3], u64>,
}

impl Histogram {
    pub fn add(&mut self, x: [i64; 3]) {
        *self.counts.entry(x).or_insert(0) += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Order-independent merge of another replica's counts.
    pub fn merge(&mut self, other: &Histogram) {
        for (x, c) in &other.counts {
            *self.counts.entry(*x).or_insert(0) += c;
        }
    }

    /// Counts projected onto one axis.
    pub fn marginal(&self, axis: usize) -> BTreeMap<i64, u64> {
        let mut m = BTreeMap::new();
        for (x, c) in &self.counts {
            *m.entry(x[axis]).or_insert(0) += c;
        }
        m
    }

    /// CSV rows `x1,x2,x3,count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x1,x2,x3,count")?;
        for (x, c) in &self.counts {
            writeln!(w, "{},{},{},{}", x[0], x[1], x[2], c)?;
        }
        Ok(())
    }
}

/// A walk experiment: emission recipe, field, duration and training prefix.
#[derive(Clone, Debug)]
pub struct WalkScenario<F> {
    pub ensemble: SourceEnsemble,
    pub emission: EmissionConfig,
    pub field: F,
    pub config: WalkConfig,
    pub steps: u64,
    /// Emissions run before measuring, to train the lattice. Not histogrammed.
    pub training: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WalkOutcome {
    pub histogram: Histogram,
    /// Measured particles dropped because their propensity left [-1, 1].
    pub overflowed: u64,
    pub training_overflowed: u64,
    pub quantum_resets: u64,
    pub external_resets: u64,
    pub forbidden_resets: u64,
}

/// Runs `training` then `n_p` particles one after another through `lat`.
/// Particle `i` (counting training) draws from `stream.particle(i)`.
pub fn run_walk_ensemble<F: ExternalField>(
    scenario: &WalkScenario<F>,
    lat: &mut Lattice,
    n_p: u64,
    stream: RngStream,
) -> Result<WalkOutcome> {
    let mut out = WalkOutcome::default();
    for i in 0..scenario.training + n_p {
        let mut rng = stream.particle(i).rng();
        let mut p = prepare_emission(&scenario.ensemble, &scenario.emission, &mut rng)?.first;
        let measured = i >= scenario.training;
        let mut alive = true;
        for _ in 0..scenario.steps {
            match step(&mut p, lat, &scenario.field, &scenario.config, &mut rng) {
                Ok(ev) => {
                    out.quantum_resets += u64::from(ev.quantum_reset);
                    out.external_resets += u64::from(ev.external_reset);
                    out.forbidden_resets += u64::from(ev.forbidden_reset);
                }
                Err(Error::PropensityOverflow { .. }) => {
                    alive = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        match (alive, measured) {
            (true, true) => out.histogram.add(p.position),
            (false, true) => out.overflowed += 1,
            (false, false) => out.training_overflowed += 1,
            (true, false) => {}
        }
    }
    Ok(out)
}
