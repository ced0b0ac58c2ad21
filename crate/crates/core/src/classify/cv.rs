//! Stratified k-fold cross-validation of the in-repo classifiers.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::DatasetRecord;
use super::knn::Knn;
use super::logistic::{LogisticModel, LogisticParams};
use super::tree::{normalise, TreeEnsemble};
use crate::noisegen::NoiseType;
use crate::rng::{domain, stream_rng};
use crate::{Error, Result};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_K: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Stationarity,
    NoiseType,
}

impl Target {
    pub fn class_names(self) -> Vec<String> {
        match self {
            Self::Stationarity => vec!["stationary".into(), "non_stationary".into()],
            Self::NoiseType => NoiseType::ALL.iter().map(|t| t.as_str().to_string()).collect(),
        }
    }

    pub fn label(self, r: &DatasetRecord) -> usize {
        match self {
            Self::Stationarity => usize::from(!r.stationary),
            Self::NoiseType => r.noise_type.index(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stationarity => "stationarity",
            Self::NoiseType => "noise_type",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierKind {
    DecisionTree { ensemble_size: usize },
    Knn { k: usize },
    Logistic(LogisticParams),
}

impl ClassifierKind {
    pub fn tree() -> Self {
        Self::DecisionTree { ensemble_size: 1 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::DecisionTree { ensemble_size: 1 } => "decision_tree",
            Self::DecisionTree { .. } => "random_forest",
            Self::Knn { .. } => "knn",
            Self::Logistic(_) => "logistic_regression",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_size: usize,
    /// `None` when the fold was skipped.
    pub accuracy: Option<f64>,
    pub skipped: Option<String>,
    /// Logistic regression only.
    pub converged: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub classifier: String,
    pub target: String,
    pub folds: usize,
    pub fold_results: Vec<FoldResult>,
    /// Mean held-out accuracy over the folds that were not skipped.
    pub mean_accuracy: f64,
    /// Tree models only: mean per-fold Gini importances, normalised.
    pub importances: Option<Vec<f64>>,
    /// Logistic regression only: every fold converged.
    pub all_converged: Option<bool>,
}

/// Fold index per record. Each class is shuffled and dealt round-robin,
/// continuing the deal across classes so fold sizes differ by at most one.
pub fn stratified_folds(labels: &[usize], n_classes: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    let mut assign = vec![usize::MAX; labels.len()];
    let mut next = 0;
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            return Err(Error::InvalidParameter(format!(
                "class {c} has {} records, fewer than {folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut stream_rng(seed, domain::FOLDS, c as u64));
        for i in members {
            assign[i] = next % folds;
            next += 1;
        }
    }
    if assign.contains(&usize::MAX) {
        return Err(Error::InvalidParameter("label out of range".into()));
    }
    Ok(assign)
}

enum Fitted {
    Trees(TreeEnsemble),
    Knn(Knn),
    Logistic(LogisticModel),
}

impl Fitted {
    fn predict(&self, row: &[f64]) -> usize {
        match self {
            Self::Trees(m) => m.predict(row),
            Self::Knn(m) => m.predict(row),
            Self::Logistic(m) => m.predict(row),
        }
    }
}

fn fit(kind: &ClassifierKind, x: &[Vec<f64>], y: &[usize], n_classes: usize, seed: u64) -> Result<Fitted> {
    Ok(match *kind {
        ClassifierKind::DecisionTree { ensemble_size } => {
            Fitted::Trees(TreeEnsemble::fit(x, y, n_classes, ensemble_size, seed)?)
        }
        ClassifierKind::Knn { k } => Fitted::Knn(Knn::fit(x, y, n_classes, k)?),
        ClassifierKind::Logistic(p) => Fitted::Logistic(LogisticModel::fit(x, y, n_classes, &p)?),
    })
}

/// k-fold cross-validation on raw features and labels. Folds run in parallel.
pub fn cross_validate(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    kind: &ClassifierKind,
    folds: usize,
    seed: u64,
) -> Result<(Vec<FoldResult>, Option<Vec<f64>>)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            what: "feature rows vs labels",
            left: x.len(),
            right: y.len(),
        });
    }
    let assign = stratified_folds(y, n_classes, folds, seed)?;
    let outcomes = (0..folds)
        .into_par_iter()
        .map(|f| {
            let (mut xtr, mut ytr, mut xte, mut yte) = (vec![], vec![], vec![], vec![]);
            for i in 0..x.len() {
                if assign[i] == f {
                    xte.push(x[i].clone());
                    yte.push(y[i]);
                } else {
                    xtr.push(x[i].clone());
                    ytr.push(y[i]);
                }
            }
            let skip = |why: String| {
                log::warn!("skipping fold {f}: {why}");
                Ok((
                    FoldResult {
                        fold: f,
                        test_size: yte.len(),
                        accuracy: None,
                        skipped: Some(why),
                        converged: None,
                    },
                    None,
                ))
            };
            if yte.is_empty() {
                return skip("empty held-out fold".into());
            }
            if ytr.iter().all(|&c| c == ytr[0]) {
                return skip("training folds contain a single class".into());
            }
            let model = fit(kind, &xtr, &ytr, n_classes, seed.wrapping_add(f as u64))?;
            let correct = xte.iter().zip(&yte).filter(|(r, &c)| model.predict(r) == c).count();
            let (converged, importances) = match &model {
                Fitted::Logistic(m) => (Some(m.converged), None),
                Fitted::Trees(m) => (None, Some(m.feature_importances())),
                Fitted::Knn(_) => (None, None),
            };
            Ok((
                FoldResult {
                    fold: f,
                    test_size: yte.len(),
                    accuracy: Some(correct as f64 / yte.len() as f64),
                    skipped: None,
                    converged,
                },
                importances,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut results = Vec::with_capacity(folds);
    let mut imp_sum: Option<Vec<f64>> = None;
    for (r, imp) in outcomes {
        if let Some(v) = imp {
            let acc = imp_sum.get_or_insert_with(|| vec![0.0; v.len()]);
            acc.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
        }
        results.push(r);
    }
    Ok((results, imp_sum.map(|v| normalise(&v))))
}

fn features(records: &[DatasetRecord]) -> Vec<Vec<f64>> {
    records.iter().map(|r| r.point.coords.to_vec()).collect()
}

/// Cross-validates one classifier on one labelling of a dataset.
pub fn evaluate(
    records: &[DatasetRecord],
    target: Target,
    kind: &ClassifierKind,
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    let x = features(records);
    let y: Vec<usize> = records.iter().map(|r| target.label(r)).collect();
    let n_classes = target.class_names().len();
    let (fold_results, importances) = cross_validate(&x, &y, n_classes, kind, folds, seed)?;
    let accs: Vec<f64> = fold_results.iter().filter_map(|r| r.accuracy).collect();
    if accs.is_empty() {
        return Err(Error::InvalidParameter("every fold was skipped".into()));
    }
    let all_converged = matches!(kind, ClassifierKind::Logistic(_))
        .then(|| fold_results.iter().all(|r| r.converged != Some(false)));
    Ok(CvReport {
        classifier: kind.name().into(),
        target: target.as_str().into(),
        folds,
        mean_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
        fold_results,
        importances,
        all_converged,
    })
}

pub fn train_decision_tree(records: &[DatasetRecord], target: Target, folds: usize, seed: u64) -> Result<CvReport> {
    evaluate(records, target, &ClassifierKind::tree(), folds, seed)
}

pub fn train_knn(records: &[DatasetRecord], target: Target, k: usize, folds: usize, seed: u64) -> Result<CvReport> {
    evaluate(records, target, &ClassifierKind::Knn { k }, folds, seed)
}

pub fn train_logistic(records: &[DatasetRecord], target: Target, folds: usize, seed: u64) -> Result<CvReport> {
    evaluate(records, target, &ClassifierKind::Logistic(LogisticParams::default()), folds, seed)
}
