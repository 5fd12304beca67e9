//! Run reports: a JSON summary plus named CSV tables.

use std::io::Write;

use serde::Serialize;

use crate::entanglement::JointPmf;
use crate::walk::Lattice;

use super::config::{Mode, ScenarioConfig};

/// A CSV table. Every empirical column sits next to its reference column.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Shortest round-trip formatting, so equal values always print identically.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub kind: String,
    pub seed: u64,
    pub mode: Mode,
    /// SHA-256 of the canonical configuration JSON.
    pub config_hash: String,
    pub code_version: String,
}

impl Provenance {
    pub fn of(cfg: &ScenarioConfig) -> Self {
        Provenance {
            kind: cfg.scenario.kind().into(),
            seed: cfg.seed,
            mode: cfg.mode,
            config_hash: cfg.hash(),
            code_version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpinLawRow {
    pub angle: f64,
    pub particles: u64,
    pub p_up: f64,
    pub reference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomogeneousSummary {
    pub rows: Vec<SpinLawRow>,
    pub max_deviation: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PersistenceSummary {
    pub particles: u64,
    pub steps: u64,
    pub resets: u64,
    pub forbidden: u64,
    pub flips_after_reset: u64,
    /// Particles whose walk left the propensity range and were dropped.
    pub overflowed: u64,
    pub p_up: f64,
    pub p_up_reference: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ProfileSummary {
    pub particles: u64,
    /// Particles that landed outside the grid.
    pub outside: u64,
    pub total_variation: f64,
    /// Positions of the maximum and minimum of the smoothed spin density.
    pub spin_max_at: i64,
    pub spin_min_at: i64,
    pub reference_spin_max_at: i64,
    pub reference_spin_min_at: i64,
    /// Summed spin density left and right of the beam centre.
    pub spin_left: f64,
    pub spin_right: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SgSingleSummary {
    pub persistence: PersistenceSummary,
    pub profile: ProfileSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CascadeRow {
    /// Angle between the analyzers (S = 1/2) or its cosine Y (S = 1).
    pub setting: f64,
    pub s1: f64,
    pub s2: f64,
    pub count: u64,
    pub n_s1: u64,
    pub frequency: f64,
    pub reference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CascadeSummary {
    pub rows: Vec<CascadeRow>,
    pub max_deviation: f64,
    /// Smallest conditioning count over all (setting, s1) cells.
    pub min_cell: u64,
    pub forbidden: u64,
    /// Largest |moment-pipeline pmf - Wigner pmf| (S = 1 only).
    pub reference_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BellSetting {
    pub theta_i: f64,
    pub theta_ii: f64,
    pub angle: f64,
    pub emitted: u64,
    pub arrivals_i: u64,
    pub arrivals_ii: u64,
    pub coincidences: u64,
    /// Coincidences joining members of different pairs.
    pub accidental: u64,
    pub orphans_i: u64,
    pub orphans_ii: u64,
    /// Share of all arrivals that ended up in a coincidence; orphan_fraction is the rest.
    pub accepted_fraction: f64,
    pub orphan_fraction: f64,
    pub joint: JointPmf,
    pub reference: JointPmf,
    pub correlation: f64,
    pub reference_correlation: f64,
    /// P(+1) over every arrival at each station.
    pub marginal_i: f64,
    pub marginal_ii: f64,
    /// Share of coincidences whose pair had mu0 within one grid step of +-mu0_hat.
    pub near_bisector: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSummary {
    pub counts: Vec<u64>,
    pub chi_square: f64,
    pub critical_1pct: f64,
    pub near_bisector: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BellSummary {
    pub window: f64,
    pub settings: Vec<BellSetting>,
    pub grid: Option<GridSummary>,
    pub chsh: Option<f64>,
    pub max_pmf_deviation: f64,
    pub max_correlation_deviation: f64,
    pub max_marginal_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkSummary {
    pub particles: u64,
    pub overflowed: u64,
    pub training_overflowed: u64,
    pub quantum_resets: u64,
    pub external_resets: u64,
    pub reference_maxima: Vec<i64>,
    pub empirical_maxima: Vec<i64>,
    /// Reference maxima with an empirical maximum within one node.
    pub matched_maxima: usize,
    pub contrast: f64,
    pub reference_contrast: f64,
    pub total_variation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Summary {
    Homogeneous(HomogeneousSummary),
    SgSingle(SgSingleSummary),
    SgCascade(CascadeSummary),
    Spin1Cascade(CascadeSummary),
    Bell(BellSummary),
    Walk(WalkSummary),
    /// Reference curves only.
    Reference,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub summary: Summary,
    pub checks: Vec<CheckOutcome>,
    #[serde(skip)]
    pub tables: Vec<Table>,
    #[serde(skip)]
    pub lattice: Option<Lattice>,
}

impl RunReport {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}
