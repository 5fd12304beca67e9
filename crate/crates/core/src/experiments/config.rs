//! Scenario configuration files.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::apparatus::SourceSpinPolicy;
use crate::error::{Error, Result};
use crate::types::SourceEnsemble;
use crate::walk::ForceAccounting;

/// Whether spin dynamics are stepped iteration by iteration or evaluated at analyzer entry.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Microscopic,
    ExpectedMotion,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "microscopic" => Ok(Mode::Microscopic),
            "expected_motion" | "expected-motion" => Ok(Mode::ExpectedMotion),
            _ => Err(Error::config("mode", format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub mode: Mode,
    /// Never echoed or hashed, so identical runs written to different places match.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub scenario: Scenario,
}

/// The fields every kind shares.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    mode: Mode,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    kind: String,
}

const HEADER_FIELDS: [&str; 4] = ["seed", "mode", "output_dir", "kind"];

fn default_seed() -> u64 {
    1
}

fn tracked<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path.is_empty() { ".".into() } else { path }, e.into_inner().to_string())
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Homogeneous(HomogeneousParams),
    SgSingle(SgSingleParams),
    SgCascade(SgCascadeParams),
    Spin1Cascade(Spin1CascadeParams),
    Bell(BellParams),
    Walk(WalkParams),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Homogeneous(_) => "homogeneous",
            Scenario::SgSingle(_) => "sg_single",
            Scenario::SgCascade(_) => "sg_cascade",
            Scenario::Spin1Cascade(_) => "spin1_cascade",
            Scenario::Bell(_) => "bell",
            Scenario::Walk(_) => "walk",
        }
    }
}

/// Angles 0, pi/n, ..., (n-1) pi/n.
pub fn uniform_angles(n: usize, span: f64) -> Vec<f64> {
    (0..n).map(|k| span * k as f64 / n as f64).collect()
}

/// Spin statistics in a homogeneous field along x3, for a polarization at each angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomogeneousParams {
    pub n_p: u64,
    pub angles: Vec<f64>,
    pub steps: u32,
    pub moment: f64,
    pub magnitude: f64,
    pub gyro: f64,
    pub renormalize: bool,
}

impl Default for HomogeneousParams {
    fn default() -> Self {
        HomogeneousParams {
            n_p: 100_000,
            angles: uniform_angles(12, PI),
            steps: 50,
            moment: 1.0,
            magnitude: 0.04,
            gyro: 1.0,
            renormalize: false,
        }
    }
}

/// One Stern-Gerlach analyzer: spin persistence and the transverse profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgSingleParams {
    /// Particles in the transverse profile.
    pub n_p: u64,
    /// Lifetime at which the profile is taken.
    pub steps: u64,
    /// Sources in the Gaussian-wave ensemble (odd).
    pub ns: usize,
    /// Inhomogeneity axis; the field and its gradient point along it.
    pub axis: usize,
    pub propagation_axis: usize,
    pub propagation_momentum: f64,
    pub moment: f64,
    pub magnitude: f64,
    pub gradient: f64,
    pub gyro: f64,
    pub boson_density: f64,
    pub source_spin: SourceSpinPolicy,
    /// Initial spinor (re, im) pairs.
    pub chi: [[f64; 2]; 2],
    pub persistence_particles: u64,
    pub persistence_steps: u64,
}

impl Default for SgSingleParams {
    fn default() -> Self {
        SgSingleParams {
            n_p: 10_000,
            steps: 64,
            ns: 17,
            axis: 2,
            propagation_axis: 1,
            propagation_momentum: 0.7,
            moment: 1.0,
            magnitude: 0.04,
            gradient: 0.1 / (PI * PI),
            gyro: 1.0,
            boson_density: 1.0,
            source_spin: SourceSpinPolicy::RedrawAtReset,
            chi: [[FRAC_1_SQRT_2, 0.0], [FRAC_1_SQRT_2, 0.0]],
            persistence_particles: 100_000,
            persistence_steps: 50,
        }
    }
}

/// Two spin-1/2 analyzers, the first along x3 and the second at each angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgCascadeParams {
    /// Particles emitted per angle.
    pub n_p: u64,
    pub angles: Vec<f64>,
    /// Iterations spent in each analyzer.
    pub steps: u32,
    pub moment: f64,
    pub magnitude: f64,
    pub gradient: f64,
    pub gyro: f64,
    pub boson_density: f64,
    pub source_spin: SourceSpinPolicy,
    pub propagation_momentum: f64,
    pub renormalize: bool,
}

impl Default for SgCascadeParams {
    fn default() -> Self {
        SgCascadeParams {
            n_p: 220_000,
            angles: (0..6).map(|k| PI * k as f64 / 5.0).collect(),
            steps: 10,
            moment: 1.0,
            magnitude: 0.04,
            gradient: 0.01,
            gyro: 1.0,
            boson_density: 1.0,
            source_spin: SourceSpinPolicy::RedrawAtReset,
            propagation_momentum: 0.7,
            renormalize: false,
        }
    }
}

/// Two spin-1 analyzers whose axes have cosine Y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Spin1CascadeParams {
    pub n_p: u64,
    pub cosines: Vec<f64>,
    pub steps: u32,
    pub moment: f64,
    pub magnitude: f64,
    pub gradient: f64,
    pub gyro: f64,
    pub boson_density: f64,
    pub source_spin: SourceSpinPolicy,
    pub propagation_momentum: f64,
    /// Restore |mu| and |tau| after each precession step. The explicit step grows both
    /// norms, and with |tau|^2 at its budget that pushes V out of the valid range.
    pub renormalize: bool,
}

impl Default for Spin1CascadeParams {
    fn default() -> Self {
        Spin1CascadeParams {
            n_p: 400_000,
            cosines: vec![1.0, 0.5, 0.0, -0.5, -1.0],
            steps: 10,
            moment: 1.0,
            magnitude: 0.04,
            gradient: 0.01,
            gyro: 1.0,
            boson_density: 1.0,
            source_spin: SourceSpinPolicy::RedrawAtReset,
            propagation_momentum: 0.7,
            renormalize: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellPolarization {
    /// N_mu directions anchored at the coincidence bisector of each setting.
    #[default]
    Grid,
    /// Uniform angle in the analyzer plane.
    Continuous,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionKind {
    None,
    FirstOrder,
    #[default]
    Exact,
}

/// The four CHSH settings: station I at `a` or `a2`, station II at `b` or `b2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub a: f64,
    pub a2: f64,
    pub b: f64,
    pub b2: f64,
}

/// Entangled pairs sent to two analyzers in the x3-x1 plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BellParams {
    /// Pairs per setting.
    pub n_p: u64,
    /// Station-I angles against a station-II analyzer along x3.
    pub angles: Vec<f64>,
    /// Explicit (station I, station II) angle pairs; replaces `angles` when set.
    pub settings: Option<Vec<[f64; 2]>>,
    /// Replaces the settings with the four CHSH combinations and reports S.
    pub chsh: Option<ChshSettings>,
    pub distance: f64,
    pub propagation_momentum: f64,
    /// Sources in the Gaussian-wave ensemble that spreads the pair momentum.
    pub ns: usize,
    /// mu_M B_M, the reset energy scale.
    pub energy: f64,
    pub n_mu: usize,
    pub polarization: BellPolarization,
    pub correction: CorrectionKind,
    /// Coincidence window in iterations; a correction-specific default when absent.
    pub window: Option<f64>,
    /// Iterations between pair emissions (pulsed source).
    pub period: f64,
    pub n_r: u32,
}

/// Default station-I angles: -7pi/6 + k pi/10, k = 0..=20.
pub fn default_bell_angles() -> Vec<f64> {
    (0..21).map(|k| -7.0 * PI / 6.0 + k as f64 * PI / 10.0).collect()
}

impl Default for BellParams {
    fn default() -> Self {
        BellParams {
            n_p: 10_000,
            angles: default_bell_angles(),
            settings: None,
            chsh: None,
            distance: 210.0,
            propagation_momentum: 0.7,
            ns: 17,
            energy: 0.04,
            n_mu: 16,
            polarization: BellPolarization::Grid,
            correction: CorrectionKind::Exact,
            window: None,
            period: 1000.0,
            n_r: 2,
        }
    }
}

impl BellParams {
    pub fn t0(&self) -> f64 {
        self.distance / self.propagation_momentum
    }

    /// Window in use: explicit, or 0.01 iterations with the exact correction, or
    /// max(1, 0.1 T0 mu_M B_M / m2^2) otherwise.
    pub fn effective_window(&self) -> f64 {
        self.window.unwrap_or(match self.correction {
            CorrectionKind::Exact => 0.01,
            _ => (0.1 * self.t0() * self.energy / self.propagation_momentum.powi(2)).max(1.0),
        })
    }

    /// (station I, station II) angle pairs in run order.
    pub fn station_settings(&self) -> Vec<[f64; 2]> {
        if let Some(c) = self.chsh {
            return vec![[c.a, c.b], [c.a, c.b2], [c.a2, c.b], [c.a2, c.b2]];
        }
        match &self.settings {
            Some(s) => s.clone(),
            None => self.angles.iter().map(|a| [*a, 0.0]).collect(),
        }
    }
}

/// A two-source lattice walk compared against the expected-motion fringes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkParams {
    pub n_p: u64,
    pub training: u64,
    pub steps: u64,
    /// Distance between the two sources.
    pub separation: i64,
    pub axis: usize,
    pub force_accounting: ForceAccounting,
    /// Replaces the two-source ensemble.
    pub ensemble: Option<SourceEnsemble>,
    /// Independent lattices whose histograms are summed.
    pub replicas: u64,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            n_p: 100_000,
            training: 10_000,
            steps: 64,
            separation: 8,
            axis: 0,
            force_accounting: ForceAccounting::Fold,
            ensemble: None,
            replicas: 1,
        }
    }
}

fn check_axis(path: &str, axis: usize) -> Result<()> {
    if axis > 2 {
        Err(Error::config(path, "axis must be 0, 1 or 2"))
    } else {
        Ok(())
    }
}

fn check_finite(path: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::config(format!("{path}[{i}]"), "must be finite")),
        None => Ok(()),
    }
}

fn check_momentum(path: &str, m: f64) -> Result<()> {
    if m > 0.0 && m <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(path, "propagation momentum must lie in (0, 1]"))
    }
}

fn check_density(path: &str, d: f64) -> Result<()> {
    if (0.0..=1.0).contains(&d) {
        Ok(())
    } else {
        Err(Error::config(path, "must lie in [0, 1]"))
    }
}

impl ScenarioConfig {
    /// Parses JSON, reporting the field path of any structural error.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::config(".", e.to_string()))?;
        let serde_json::Value::Object(mut fields) = value else {
            return Err(Error::config(".", "expected a JSON object"));
        };
        // Header and parameters are read separately: path tracking does not see through
        // flattened fields.
        let mut header = serde_json::Map::new();
        for key in HEADER_FIELDS {
            if let Some(v) = fields.remove(key) {
                header.insert(key.into(), v);
            }
        }
        let header: Header = tracked(header.into())?;
        let params = serde_json::Value::Object(fields);
        let scenario = match header.kind.as_str() {
            "homogeneous" => Scenario::Homogeneous(tracked(params)?),
            "sg_single" => Scenario::SgSingle(tracked(params)?),
            "sg_cascade" => Scenario::SgCascade(tracked(params)?),
            "spin1_cascade" => Scenario::Spin1Cascade(tracked(params)?),
            "bell" => Scenario::Bell(tracked(params)?),
            "walk" => Scenario::Walk(tracked(params)?),
            other => {
                return Err(Error::config(
                    "kind",
                    format!("unknown kind `{other}`; expected homogeneous, sg_single, sg_cascade, spin1_cascade, bell or walk"),
                ))
            }
        };
        let cfg = ScenarioConfig {
            seed: header.seed,
            mode: header.mode,
            output_dir: header.output_dir,
            scenario,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ScenarioConfig::from_json(&text)
    }

    /// Checks the kind-specific constraints serde cannot express.
    pub fn validate(&self) -> Result<()> {
        match &self.scenario {
            Scenario::Homogeneous(p) => {
                check_finite("angles", &p.angles)?;
            }
            Scenario::SgSingle(p) => {
                check_axis("axis", p.axis)?;
                check_axis("propagation_axis", p.propagation_axis)?;
                if p.axis == p.propagation_axis {
                    return Err(Error::config("propagation_axis", "must differ from the inhomogeneity axis"));
                }
                if p.ns % 2 == 0 {
                    return Err(Error::config("ns", "must be odd"));
                }
                if p.steps == 0 {
                    return Err(Error::config("steps", "must be positive"));
                }
                check_momentum("propagation_momentum", p.propagation_momentum)?;
                check_density("boson_density", p.boson_density)?;
                let n: f64 = p.chi.iter().map(|c| c[0] * c[0] + c[1] * c[1]).sum();
                if (n - 1.0).abs() > 1e-9 {
                    return Err(Error::config("chi", format!("spinor norm^2 is {n}, not 1")));
                }
            }
            Scenario::SgCascade(p) => {
                check_finite("angles", &p.angles)?;
                check_momentum("propagation_momentum", p.propagation_momentum)?;
                check_density("boson_density", p.boson_density)?;
            }
            Scenario::Spin1Cascade(p) => {
                if let Some(i) = p.cosines.iter().position(|y| !(y.abs() <= 1.0)) {
                    return Err(Error::config(format!("cosines[{i}]"), "must lie in [-1, 1]"));
                }
                check_momentum("propagation_momentum", p.propagation_momentum)?;
                check_density("boson_density", p.boson_density)?;
            }
            Scenario::Bell(p) => {
                check_finite("angles", &p.angles)?;
                check_momentum("propagation_momentum", p.propagation_momentum)?;
                if p.ns % 2 == 0 {
                    return Err(Error::config("ns", "must be odd"));
                }
                if p.n_mu == 0 {
                    return Err(Error::config("n_mu", "must be positive"));
                }
                if !(p.distance > 0.0) {
                    return Err(Error::config("distance", "must be positive"));
                }
                if !(p.period > 0.0) {
                    return Err(Error::config("period", "must be positive"));
                }
                if !(1..=2).contains(&p.n_r) {
                    return Err(Error::config("n_r", "only 1 or 2 particles per event are modelled"));
                }
                if let Some(w) = p.window {
                    if !(w >= 0.0 && w.is_finite()) {
                        return Err(Error::config("window", "must be finite and >= 0"));
                    }
                }
            }
            Scenario::Walk(p) => {
                check_axis("axis", p.axis)?;
                if p.steps == 0 {
                    return Err(Error::config("steps", "must be positive"));
                }
                if p.replicas == 0 {
                    return Err(Error::config("replicas", "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Canonical JSON of the effective configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
