use serde::{Deserialize, Serialize};

use crate::qfs::QfsPoint;
use crate::qsim::Observable;
use crate::{Error, Result};

/// A labelled point simulated from a known noise process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub label: String,
    pub point: QfsPoint,
}

impl ReferencePoint {
    pub fn new(label: impl Into<String>, point: QfsPoint) -> Self {
        Self {
            label: label.into(),
            point,
        }
    }
}

/// Mean per-observable distances from a cluster to one reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub label: String,
    /// `d_X, d_Y, d_Z`.
    pub per_observable: [f64; 3],
    pub total: f64,
}

impl DistanceReport {
    /// Builds a report; `total` is `(d_X + d_Y) + d_Z`.
    pub fn new(label: impl Into<String>, per_observable: [f64; 3]) -> Self {
        let [x, y, z] = per_observable;
        Self {
            label: label.into(),
            per_observable,
            total: x + y + z,
        }
    }
}

fn euclid3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Mean Euclidean distance in one observable's `(α, β, γ)` subspace.
///
/// Distances are sorted before summation so the result does not depend on
/// the order of the cluster.
pub fn subspace_distance(cluster: &[QfsPoint], reference: &ReferencePoint, observable: Observable) -> Result<f64> {
    if cluster.is_empty() {
        return Err(Error::Empty("cluster of unknown points"));
    }
    let r = reference.point.observable(observable);
    let mut d: Vec<f64> = cluster.iter().map(|p| euclid3(p.observable(observable), r)).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite QFS coordinates".into()));
    }
    d.sort_by(f64::total_cmp);
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

pub fn distance_report(cluster: &[QfsPoint], reference: &ReferencePoint) -> Result<DistanceReport> {
    let mut d = [0.0; 3];
    for o in Observable::ALL {
        d[o.index()] = subspace_distance(cluster, reference, o)?;
    }
    Ok(DistanceReport::new(reference.label.clone(), d))
}

/// Winner of a distance table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: String,
    /// Position of the winner in the table.
    pub index: usize,
    /// More than one entry shares the minimal total.
    pub tie: bool,
    pub table: Vec<DistanceReport>,
}

/// Totals within this relative margin count as tied.
const TIE_TOL: f64 = 1e-12;

/// Argmin of `total`; ties go to the lexicographically smallest label.
pub fn argmin_table(table: Vec<DistanceReport>) -> Result<Verdict> {
    if table.is_empty() {
        return Err(Error::Empty("distance table"));
    }
    if table.iter().any(|r| !r.total.is_finite()) {
        return Err(Error::InvalidParameter("non-finite distance in table".into()));
    }
    let best = table.iter().map(|r| r.total).fold(f64::INFINITY, f64::min);
    let margin = TIE_TOL * best.abs().max(1.0);
    let tied: Vec<usize> = (0..table.len())
        .filter(|&i| table[i].total - best <= margin)
        .collect();
    let index = *tied
        .iter()
        .min_by(|&&a, &&b| table[a].label.cmp(&table[b].label).then(a.cmp(&b)))
        .expect("at least one entry attains the minimum");
    Ok(Verdict {
        label: table[index].label.clone(),
        index,
        tie: tied.len() > 1,
        table,
    })
}

/// Distance table against every reference, and the closest one.
pub fn nearest_reference(cluster: &[QfsPoint], refs: &[ReferencePoint]) -> Result<Verdict> {
    if refs.is_empty() {
        return Err(Error::Empty("reference points"));
    }
    let table = refs
        .iter()
        .map(|r| distance_report(cluster, r))
        .collect::<Result<Vec<_>>>()?;
    argmin_table(table)
}
