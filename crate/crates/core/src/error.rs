use std::path::PathBuf;

/// Everything that can go wrong inside the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value is missing or out of range. `path` names the offending field.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// A propensity component left [-1, 1]; the walk has no rule for that regime.
    #[error("momentum propensity {value} outside [-1, 1]")]
    PropensityOverflow { value: f64 },

    /// An expected-motion coefficient B(t) vanished (harmonic focus).
    #[error("kinematic coefficient B vanishes at t = {t}")]
    SingularTime { t: f64 },

    /// The moment pair does not define a valid spin pmf.
    #[error("moments (M = {m}, V = {v}) do not give a valid pmf")]
    InvalidMoments { m: f64, v: f64 },

    /// A spin state violates one of its algebraic constraints.
    #[error("inconsistent spin state: {0}")]
    InconsistentState(String),

    /// A reset would need more energy than the propensity carries.
    #[error("energetically forbidden reset (alpha^2 = {alpha_sq})")]
    ForbiddenReset { alpha_sq: f64 },

    /// A spinor or density that must be normalized was not.
    #[error("input not normalized (norm^2 = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    /// Two distributions compared on different supports.
    #[error("binning mismatch: {left} vs {right} bins")]
    BinMismatch { left: usize, right: usize },

    /// A root solve failed to bracket or converge.
    #[error("solver failed: {0}")]
    Solver(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed lattice snapshot: {0}")]
    Snapshot(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the user's configuration rather than the run itself.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
