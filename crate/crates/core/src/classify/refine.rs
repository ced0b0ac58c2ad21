//! Grid-shrinking search for a scalar noise parameter (a PSD peak bin).
//!
//! Each stage simulates references on a grid of peak positions and ranks
//! them by total distance to the unknown cluster. The next grid has the same
//! number of points, placed at the cell midpoints of the interval spanned by
//! the winner and its closer grid neighbour.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distance::{argmin_table, distance_report, DistanceReport, ReferencePoint};
use crate::qfs::QfsPoint;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineStage {
    pub peaks: Vec<f64>,
    pub table: Vec<DistanceReport>,
    pub best_peak: f64,
    pub tie: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub estimate: f64,
    pub stages: Vec<RefineStage>,
}

pub fn peak_label(peak: f64) -> String {
    format!("peak {peak}")
}

/// Winner of a stage: the smallest total, ties to the earlier grid entry.
fn best_index(totals: &[f64]) -> usize {
    let mut best = 0;
    for (i, t) in totals.iter().enumerate() {
        if *t < totals[best] {
            best = i;
        }
    }
    best
}

/// The next grid from one stage's peaks and totals.
///
/// With peaks `{15, 30, 60, 120, 240, 480}` and 240 best, 120 second, the
/// interval is `[120, 240]` and the next grid is `{130, 150, …, 230}`.
pub fn narrow_grid(peaks: &[f64], totals: &[f64]) -> Result<Vec<f64>> {
    if peaks.len() < 2 || peaks.len() != totals.len() {
        return Err(Error::InvalidGrid(format!(
            "need at least two peaks with one total each, got {} and {}",
            peaks.len(),
            totals.len()
        )));
    }
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| peaks[a].total_cmp(&peaks[b]));
    let sorted_totals: Vec<f64> = order.iter().map(|&i| totals[i]).collect();
    let b = best_index(&sorted_totals);
    let n = peaks.len();
    let neighbour = match (b.checked_sub(1), (b + 1 < n).then_some(b + 1)) {
        (Some(l), Some(r)) => {
            if sorted_totals[r] < sorted_totals[l] {
                r
            } else {
                l
            }
        }
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (None, None) => unreachable!("grid has at least two points"),
    };
    let (lo, hi) = {
        let (p, q) = (peaks[order[b]], peaks[order[neighbour]]);
        (p.min(q), p.max(q))
    };
    let step = (hi - lo) / n as f64;
    Ok((0..n).map(|i| lo + (i as f64 + 0.5) * step).collect())
}

/// Runs `budget` stages starting from `grid`; `reference(peak)` simulates
/// the reference point for a peak position. Stage references are built in
/// parallel.
pub fn refine_peak_search<F>(
    unknown: &[QfsPoint],
    grid: &[f64],
    budget: usize,
    reference: F,
) -> Result<RefineOutcome>
where
    F: Fn(f64) -> Result<QfsPoint> + Sync,
{
    if budget == 0 {
        return Err(Error::InvalidParameter("refinement budget must be at least 1".into()));
    }
    if unknown.is_empty() {
        return Err(Error::Empty("cluster of unknown points"));
    }
    if grid.len() < 2 || grid.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidGrid("peak grid needs at least two finite values".into()));
    }
    let mut peaks = grid.to_vec();
    let mut stages = Vec::with_capacity(budget);
    for stage in 0..budget {
        let refs = peaks
            .par_iter()
            .map(|&p| reference(p).map(|pt| ReferencePoint::new(peak_label(p), pt)))
            .collect::<Result<Vec<_>>>()?;
        let table = refs
            .iter()
            .map(|r| distance_report(unknown, r))
            .collect::<Result<Vec<_>>>()?;
        let totals: Vec<f64> = table.iter().map(|r| r.total).collect();
        let verdict = argmin_table(table)?;
        let best_peak = peaks[best_index(&totals)];
        log::info!("refinement stage {}: best peak {best_peak}", stage + 1);
        let next = if stage + 1 < budget {
            Some(narrow_grid(&peaks, &totals)?)
        } else {
            None
        };
        stages.push(RefineStage {
            peaks: peaks.clone(),
            table: verdict.table,
            best_peak,
            tie: verdict.tie,
        });
        if let Some(n) = next {
            peaks = n;
        }
    }
    Ok(RefineOutcome {
        estimate: stages.last().expect("budget ≥ 1").best_peak,
        stages,
    })
}
