use rayon::prelude::*;

use crate::emission::{EmissionConfig, MomentumDist};
use crate::error::Result;
use crate::expected::{position_pdf, Kinematics, Motion};
use crate::oracle::compare_distributions;
use crate::rng::RngStream;
use crate::types::{PairMode, Source, SourceEnsemble};
use crate::vec3::Vec3;
use crate::walk::{run_walk_ensemble, Histogram, Lattice, NoField, WalkConfig, WalkOutcome, WalkScenario};

use super::config::WalkParams;
use super::report::{Summary, Table, WalkSummary};

/// Fringe peaks below this share of the tallest one are ignored.
const PEAK_FLOOR: f64 = 0.05;

fn ensemble(p: &WalkParams) -> Result<SourceEnsemble> {
    if let Some(e) = &p.ensemble {
        return Ok(e.clone());
    }
    let half = p.separation / 2;
    let at = |x: i64| {
        let mut position = [0; 3];
        position[p.axis] = x;
        Source {
            position,
            probability: 0.5,
            phase: Vec3::ZERO,
        }
    };
    SourceEnsemble::new(vec![at(-half), at(p.separation - half)], PairMode::Single)
}

fn nodes(p: &WalkParams) -> Vec<i64> {
    let t = p.steps as i64;
    (-t..=t).collect()
}

fn reference(p: &WalkParams, ens: &SourceEnsemble) -> Result<Vec<f64>> {
    let motion = Motion::along(p.axis, Kinematics::Free);
    nodes(p)
        .iter()
        .map(|x| {
            let mut v = Vec3::ZERO;
            v[p.axis] = *x as f64;
            position_pdf(v, p.steps as f64, ens, &motion)
        })
        .collect()
}

fn smooth3(v: &[f64]) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            let l = if i > 0 { v[i - 1] } else { v[i] };
            let r = if i + 1 < v.len() { v[i + 1] } else { v[i] };
            (l + 2.0 * v[i] + r) / 4.0
        })
        .collect()
}

/// Interior local maxima (rising on the left, not rising on the right) above the floor.
pub(super) fn local_maxima(v: &[f64]) -> Vec<usize> {
    let top = v.iter().cloned().fold(0.0, f64::max);
    (1..v.len().saturating_sub(1))
        .filter(|i| v[*i] > v[i - 1] && v[*i] >= v[i + 1] && v[*i] >= PEAK_FLOOR * top)
        .collect()
}

/// Mean (peak - trough)/(peak + trough) over the troughs between consecutive `peaks`,
/// with the peak height averaged over the two neighbours.
pub(super) fn contrast(v: &[f64], peaks: &[usize]) -> f64 {
    let values: Vec<f64> = peaks
        .windows(2)
        .filter_map(|w| {
            let trough = (w[0]..=w[1]).map(|i| v[i]).fold(f64::INFINITY, f64::min);
            let peak = (v[w[0]] + v[w[1]]) / 2.0;
            (peak + trough > 0.0).then(|| (peak - trough) / (peak + trough))
        })
        .collect();
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub(super) fn run(p: &WalkParams, seed: u64) -> Result<(Summary, Vec<Table>, Option<Lattice>)> {
    let ens = ensemble(p)?;
    let mut axes = [false; 3];
    axes[p.axis] = true;
    let mut config = WalkConfig::one_dimensional(p.axis);
    config.force_accounting = p.force_accounting;
    let scenario = WalkScenario {
        ensemble: ens.clone(),
        emission: EmissionConfig {
            spin: None,
            momentum: MomentumDist::Uniform { axes },
            rho: Vec3::axis(p.axis),
            ..EmissionConfig::default()
        },
        field: NoField,
        config,
        steps: p.steps,
        training: p.training,
    };
    let runs: Vec<(WalkOutcome, Lattice)> = (0..p.replicas)
        .into_par_iter()
        .map(|r| {
            let mut lat = Lattice::new();
            let out = run_walk_ensemble(&scenario, &mut lat, p.n_p, RngStream::new(seed, r, 0))?;
            Ok((out, lat))
        })
        .collect::<Result<_>>()?;

    let mut histogram = Histogram::default();
    let mut summary = WalkSummary {
        particles: p.n_p * p.replicas,
        overflowed: 0,
        training_overflowed: 0,
        quantum_resets: 0,
        external_resets: 0,
        reference_maxima: Vec::new(),
        empirical_maxima: Vec::new(),
        matched_maxima: 0,
        contrast: 0.0,
        reference_contrast: 0.0,
        total_variation: 0.0,
    };
    for (out, _) in &runs {
        histogram.merge(&out.histogram);
        summary.overflowed += out.overflowed;
        summary.training_overflowed += out.training_overflowed;
        summary.quantum_resets += out.quantum_resets;
        summary.external_resets += out.external_resets;
    }

    let grid = nodes(p);
    let marginal = histogram.marginal(p.axis);
    let counts: Vec<f64> = grid.iter().map(|x| *marginal.get(x).unwrap_or(&0) as f64).collect();
    let smoothed = smooth3(&counts);
    let reference = reference(p, &ens)?;

    let ref_peaks = local_maxima(&reference);
    let emp_peaks = local_maxima(&smoothed);
    summary.matched_maxima = ref_peaks
        .iter()
        .filter(|r| emp_peaks.iter().any(|e| e.abs_diff(**r) <= 1))
        .count();
    summary.reference_maxima = ref_peaks.iter().map(|i| grid[*i]).collect();
    summary.empirical_maxima = emp_peaks.iter().map(|i| grid[*i]).collect();
    summary.contrast = contrast(&smoothed, &ref_peaks);
    summary.reference_contrast = contrast(&reference, &ref_peaks);
    summary.total_variation = compare_distributions(&counts, &reference)?.total_variation;

    let mut pdf = Table::new("pdf", &["x", "count", "count_smoothed", "ref_density"]);
    for (k, x) in grid.iter().enumerate() {
        pdf.push(vec![*x as f64, counts[k], smoothed[k], reference[k]]);
    }
    let mut hist = Table::new("histogram", &["x1", "x2", "x3", "count"]);
    for (x, c) in &histogram.counts {
        hist.push(vec![x[0] as f64, x[1] as f64, x[2] as f64, *c as f64]);
    }
    let lattice = runs.into_iter().next().map(|(_, lat)| lat);
    Ok((Summary::Walk(summary), vec![pdf, hist], lattice))
}

pub(super) fn reference_tables(p: &WalkParams) -> Result<Vec<Table>> {
    let ens = ensemble(p)?;
    let mut t = Table::new("pdf_reference", &["x", "ref_density"]);
    for (x, r) in nodes(p).iter().zip(reference(p, &ens)?) {
        t.push(vec![*x as f64, r]);
    }
    Ok(vec![t])
}
