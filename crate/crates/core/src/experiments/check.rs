//! Pass/fail thresholds applied to a finished run.

use super::report::{CheckOutcome, Summary};

fn outcome(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        passed,
        detail,
    }
}

pub const SPIN_LAW_TOL: f64 = 0.005;
pub const CASCADE_TOL: f64 = 0.01;
pub const WIGNER_TOL: f64 = 1e-10;
pub const PROFILE_TV: f64 = 0.10;
pub const EXTREMA_NODES: i64 = 2;
pub const BELL_TOL: f64 = 0.05;
pub const MARGINAL_TOL: f64 = 0.02;
pub const NEAR_BISECTOR: f64 = 0.95;
pub const CHSH_MIN: f64 = 2.6;
pub const CONTRAST_MIN: f64 = 0.5;

/// Every threshold that applies to `summary`.
pub fn evaluate(summary: &Summary) -> Vec<CheckOutcome> {
    match summary {
        Summary::Homogeneous(s) => vec![outcome(
            "spin law",
            !s.rows.is_empty() && s.max_deviation <= SPIN_LAW_TOL,
            format!("max |P(+1) - (1+cos)/2| = {:.5} (tol {SPIN_LAW_TOL})", s.max_deviation),
        )],
        Summary::SgSingle(s) => {
            let p = &s.persistence;
            let f = &s.profile;
            let opposite = f.spin_max_at.signum() * f.spin_min_at.signum() < 0;
            let dmax = (f.spin_max_at - f.reference_spin_max_at).abs();
            let dmin = (f.spin_min_at - f.reference_spin_min_at).abs();
            vec![
                outcome(
                    "spin persistence",
                    p.resets > 0 && p.flips_after_reset == 0,
                    format!("{} flips after {} resets", p.flips_after_reset, p.resets),
                ),
                outcome(
                    "profile total variation",
                    f.total_variation <= PROFILE_TV,
                    format!("TV = {:.4} (max {PROFILE_TV})", f.total_variation),
                ),
                outcome(
                    "spin density sign change",
                    opposite && f.spin_left * f.spin_right < 0.0,
                    format!(
                        "max at {}, min at {}, left sum {:.4}, right sum {:.4}",
                        f.spin_max_at, f.spin_min_at, f.spin_left, f.spin_right
                    ),
                ),
                outcome(
                    "spin density extrema",
                    dmax <= EXTREMA_NODES && dmin <= EXTREMA_NODES,
                    format!(
                        "max {} vs {}, min {} vs {}",
                        f.spin_max_at, f.reference_spin_max_at, f.spin_min_at, f.reference_spin_min_at
                    ),
                ),
            ]
        }
        Summary::SgCascade(s) | Summary::Spin1Cascade(s) => {
            let mut out = vec![outcome(
                "cascade table",
                !s.rows.is_empty() && s.min_cell > 0 && s.max_deviation <= CASCADE_TOL,
                format!(
                    "max deviation {:.5} (tol {CASCADE_TOL}), smallest cell {}",
                    s.max_deviation, s.min_cell
                ),
            )];
            if let Some(gap) = s.reference_gap {
                out.push(outcome(
                    "moment route equals Wigner",
                    gap <= WIGNER_TOL,
                    format!("max gap {gap:.3e} (tol {WIGNER_TOL:e})"),
                ));
            }
            out
        }
        Summary::Bell(s) => {
            let mut out = vec![
                outcome(
                    "joint pmf",
                    !s.settings.is_empty() && s.max_pmf_deviation <= BELL_TOL,
                    format!("max deviation {:.4} (tol {BELL_TOL})", s.max_pmf_deviation),
                ),
                outcome(
                    "correlation",
                    !s.settings.is_empty() && s.max_correlation_deviation <= BELL_TOL,
                    format!("max |E + cos| {:.4} (tol {BELL_TOL})", s.max_correlation_deviation),
                ),
                outcome(
                    "marginals",
                    !s.settings.is_empty() && s.max_marginal_deviation <= MARGINAL_TOL,
                    format!("max |P(+1) - 1/2| {:.4} (tol {MARGINAL_TOL})", s.max_marginal_deviation),
                ),
            ];
            if let Some(g) = &s.grid {
                out.push(outcome(
                    "coincidences select the bisector",
                    g.near_bisector >= NEAR_BISECTOR,
                    format!("{:.4} within one grid step (min {NEAR_BISECTOR})", g.near_bisector),
                ));
                out.push(outcome(
                    "emitted polarizations uniform",
                    g.chi_square <= g.critical_1pct,
                    format!("chi2 {:.3} vs critical {:.3}", g.chi_square, g.critical_1pct),
                ));
            }
            if let Some(chsh) = s.chsh {
                out.push(outcome(
                    "CHSH",
                    chsh >= CHSH_MIN,
                    format!("S = {chsh:.4} (min {CHSH_MIN})"),
                ));
            }
            out
        }
        Summary::Walk(s) => vec![
            outcome(
                "fringe positions",
                !s.reference_maxima.is_empty() && s.matched_maxima == s.reference_maxima.len(),
                format!("{}/{} reference maxima matched", s.matched_maxima, s.reference_maxima.len()),
            ),
            outcome(
                "fringe contrast",
                s.contrast >= CONTRAST_MIN,
                format!(
                    "contrast {:.4} (min {CONTRAST_MIN}, reference {:.4})",
                    s.contrast, s.reference_contrast
                ),
            ),
        ],
        Summary::Reference => Vec::new(),
    }
}
