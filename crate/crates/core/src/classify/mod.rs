//! Noise identification: nearest-reference classification in the QFS,
//! peak refinement, labelled dataset generation and simple classifiers.

pub mod cv;
pub mod dataset;
pub mod distance;
pub mod knn;
pub mod logistic;
pub mod refine;
pub mod tree;

pub use cv::{
    cross_validate, evaluate, stratified_folds, train_decision_tree, train_knn, train_logistic, ClassifierKind,
    CvReport, FoldResult, Target, DEFAULT_FOLDS, DEFAULT_K,
};
pub use dataset::{generate_dataset, DatasetRanges, DatasetRecord};
pub use distance::{
    argmin_table, distance_report, nearest_reference, subspace_distance, DistanceReport, ReferencePoint, Verdict,
};
pub use knn::Knn;
pub use logistic::{LogisticModel, LogisticParams};
pub use refine::{narrow_grid, peak_label, refine_peak_search, RefineOutcome, RefineStage};
pub use tree::{DecisionTree, TreeEnsemble};
