//! Named experiments: configuration, dispatch, reports, files and thresholds.

mod bell;
mod cascade;
pub mod check;
pub mod config;
mod homogeneous;
mod lattice_walk;
pub mod output;
pub mod report;
mod sg;

pub use cascade::spin1_reference_gap;
pub use check::evaluate;
pub use config::{Mode, Scenario, ScenarioConfig};
pub use output::emit_outputs;
pub use report::{RunReport, Summary, Table};

use crate::error::Result;

/// Runs the configured experiment. Particles fan out over the current rayon pool; every
/// reduction runs in particle order, so the report does not depend on the worker count.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut lattice = None;
    let (summary, tables) = match &cfg.scenario {
        Scenario::Homogeneous(p) => homogeneous::run(p, cfg.seed, cfg.mode)?,
        Scenario::SgSingle(p) => sg::run(p, cfg.seed, cfg.mode)?,
        Scenario::SgCascade(p) => cascade::run_half(p, cfg.seed, cfg.mode)?,
        Scenario::Spin1Cascade(p) => cascade::run_spin1(p, cfg.seed, cfg.mode)?,
        Scenario::Bell(p) => bell::run(p, cfg.seed)?,
        Scenario::Walk(p) => {
            let (s, t, lat) = lattice_walk::run(p, cfg.seed)?;
            lattice = lat;
            (s, t)
        }
    };
    Ok(RunReport {
        provenance: report::Provenance::of(cfg),
        checks: evaluate(&summary),
        summary,
        tables,
        lattice,
    })
}

/// Reference curves only, without simulating.
pub fn run_oracle(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    let tables = match &cfg.scenario {
        Scenario::Homogeneous(p) => homogeneous::reference_tables(p),
        Scenario::SgSingle(p) => sg::reference_tables(p)?,
        Scenario::SgCascade(p) => cascade::half_reference_tables(p)?,
        Scenario::Spin1Cascade(p) => cascade::spin1_reference_tables(p)?,
        Scenario::Bell(p) => bell::reference_tables(p),
        Scenario::Walk(p) => lattice_walk::reference_tables(p)?,
    };
    Ok(RunReport {
        provenance: report::Provenance::of(cfg),
        summary: Summary::Reference,
        checks: Vec::new(),
        tables,
        lattice: None,
    })
}
