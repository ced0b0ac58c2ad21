//! CART decision trees with the Gini criterion, and bagged ensembles.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{domain, stream_rng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Fully grown binary tree: no depth limit, leaves of size one allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
    /// Unnormalised weighted impurity decrease per feature.
    impurity_decrease: Vec<f64>,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / nf).powi(2)).sum::<f64>()
}

/// Majority class; ties go to the smallest class index.
fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

pub(crate) fn check_training_set(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            what: "feature rows vs labels",
            left: x.len(),
            right: y.len(),
        });
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("feature rows must share a non-zero length".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite feature value".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidParameter(format!("label {bad} out of range for {n_classes} classes")));
    }
    Ok(d)
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    /// Features examined per split; `None` means all of them.
    max_features: Option<usize>,
    rng: Option<ChaCha8Rng>,
    nodes: Vec<Node>,
    decrease: Vec<f64>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    /// Weighted child impurity `n_l·G_l + n_r·G_r`.
    child_impurity: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn best_split_on(&self, idx: &mut [usize], feature: usize, best: &mut Option<BestSplit>) {
        let x = self.x;
        idx.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]).then(a.cmp(&b)));
        let n = idx.len();
        let mut left = vec![0usize; self.n_classes];
        let mut right = self.counts(idx);
        for pos in 0..n - 1 {
            let c = self.y[idx[pos]];
            left[c] += 1;
            right[c] -= 1;
            let (lo, hi) = (x[idx[pos]][feature], x[idx[pos + 1]][feature]);
            if lo == hi {
                continue;
            }
            let nl = pos + 1;
            let imp = nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl);
            if best.as_ref().is_none_or(|b| imp < b.child_impurity) {
                let mid = lo + (hi - lo) / 2.0;
                // guard against the midpoint rounding up to `hi`
                let threshold = if mid < hi { mid } else { lo };
                *best = Some(BestSplit {
                    feature,
                    threshold,
                    child_impurity: imp,
                });
            }
        }
    }

    fn candidate_features(&mut self, d: usize) -> Vec<usize> {
        match (self.max_features, self.rng.as_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn grow(&mut self, idx: &mut [usize]) -> usize {
        let counts = self.counts(idx);
        let n = idx.len();
        let node_impurity = gini(&counts, n);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority(&counts) });
        if node_impurity == 0.0 || n < 2 {
            return slot;
        }
        let d = self.x[0].len();
        let mut best = None;
        for f in self.candidate_features(d) {
            self.best_split_on(idx, f, &mut best);
        }
        if best.is_none() && self.max_features.is_some() {
            // the sampled features were all constant here; fall back to every feature
            for f in 0..d {
                self.best_split_on(idx, f, &mut best);
            }
        }
        let Some(split) = best else {
            return slot;
        };
        self.decrease[split.feature] += n as f64 * node_impurity - split.child_impurity;
        let x = self.x;
        idx.sort_by(|&a, &b| {
            (x[a][split.feature] > split.threshold)
                .cmp(&(x[b][split.feature] > split.threshold))
                .then(a.cmp(&b))
        });
        let n_left = idx.iter().filter(|&&i| x[i][split.feature] <= split.threshold).count();
        let (l_idx, r_idx) = idx.split_at_mut(n_left);
        let left = self.grow(l_idx);
        let right = self.grow(r_idx);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        slot
    }
}

impl DecisionTree {
    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<Self> {
        let all: Vec<usize> = (0..x.len()).collect();
        Self::fit_subset(x, y, n_classes, &all, None, None)
    }

    fn fit_subset(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        rows: &[usize],
        max_features: Option<usize>,
        rng: Option<ChaCha8Rng>,
    ) -> Result<Self> {
        let d = check_training_set(x, y, n_classes)?;
        let mut b = Builder {
            x,
            y,
            n_classes,
            max_features,
            rng,
            nodes: Vec::new(),
            decrease: vec![0.0; d],
        };
        let mut idx = rows.to_vec();
        b.grow(&mut idx);
        Ok(Self {
            nodes: b.nodes,
            n_features: d,
            impurity_decrease: b.decrease,
        })
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Gini importances normalised to sum to one; all zero for a single leaf.
    pub fn feature_importances(&self) -> Vec<f64> {
        normalise(&self.impurity_decrease)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }
}

pub(crate) fn normalise(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter().map(|x| x / total).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Bagged trees with `√d` features per split. With a single member the
/// tree is grown on the full training set with every feature, i.e. a plain
/// decision tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    trees: Vec<DecisionTree>,
    n_classes: usize,
}

impl TreeEnsemble {
    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, size: usize, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParameter("ensemble size must be at least 1".into()));
        }
        let d = check_training_set(x, y, n_classes)?;
        if size == 1 {
            return Ok(Self {
                trees: vec![DecisionTree::fit(x, y, n_classes)?],
                n_classes,
            });
        }
        let m = ((d as f64).sqrt().round() as usize).max(1);
        let trees = (0..size)
            .map(|t| {
                let mut rng = stream_rng(seed, domain::FOREST, t as u64);
                let rows: Vec<usize> = (0..x.len()).map(|_| rng.random_range(0..x.len())).collect();
                DecisionTree::fit_subset(x, y, n_classes, &rows, Some(m), Some(rng))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { trees, n_classes })
    }

    /// Majority vote; ties go to the smallest class index.
    pub fn predict(&self, row: &[f64]) -> usize {
        let mut votes = vec![0; self.n_classes];
        for t in &self.trees {
            votes[t.predict(row)] += 1;
        }
        majority(&votes)
    }

    /// Mean of the members' normalised importances, renormalised.
    pub fn feature_importances(&self) -> Vec<f64> {
        let d = self.trees[0].n_features();
        let mut acc = vec![0.0; d];
        for t in &self.trees {
            for (a, v) in acc.iter_mut().zip(t.feature_importances()) {
                *a += v;
            }
        }
        normalise(&acc)
    }

    pub fn size(&self) -> usize {
        self.trees.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn separable_one_dimensional() {
        let x = rows(&[0.1, 0.2, 0.3, 0.7, 0.8, 0.9]);
        let y = [0, 0, 0, 1, 1, 1];
        let t = DecisionTree::fit(&x, &y, 2).unwrap();
        assert_eq!(t.num_nodes(), 3);
        for (r, &c) in x.iter().zip(&y) {
            assert_eq!(t.predict(r), c);
        }
        assert_eq!(t.predict(&[0.49]), 0);
        assert_eq!(t.predict(&[0.51]), 1);
        assert_eq!(t.feature_importances(), vec![1.0]);
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5, 0], 5), 0.0);
        assert!((gini(&[2, 2], 4) - 0.5).abs() < 1e-15);
        assert!((gini(&[1, 1, 1], 3) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fully_grown_tree_fits_training_data() {
        // xor pattern needs depth two
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let t = DecisionTree::fit(&x, &y, 2).unwrap();
        for (r, &c) in x.iter().zip(&y) {
            assert_eq!(t.predict(r), c);
        }
        let imp = t.feature_importances();
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn importances_follow_the_informative_feature() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 7) as f64, i as f64]).collect();
        let y: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        let imp = DecisionTree::fit(&x, &y, 2).unwrap().feature_importances();
        assert_eq!(imp, vec![0.0, 1.0]);
    }

    #[test]
    fn pure_root_is_a_leaf() {
        let t = DecisionTree::fit(&rows(&[1.0, 2.0]), &[1, 1], 2).unwrap();
        assert_eq!(t.num_nodes(), 1);
        assert_eq!(t.predict(&[5.0]), 1);
        assert_eq!(t.feature_importances(), vec![0.0]);
    }

    #[test]
    fn conflicting_duplicates_stop_splitting() {
        let t = DecisionTree::fit(&rows(&[1.0, 1.0, 1.0]), &[0, 1, 1], 2).unwrap();
        assert_eq!(t.num_nodes(), 1);
        assert_eq!(t.predict(&[1.0]), 1);
    }

    #[test]
    fn bad_training_sets_are_rejected() {
        assert!(DecisionTree::fit(&[], &[], 2).is_err());
        assert!(DecisionTree::fit(&rows(&[1.0]), &[2], 2).is_err());
        assert!(DecisionTree::fit(&rows(&[1.0, 2.0]), &[0], 2).is_err());
    }

    #[test]
    fn ensemble_of_one_is_the_plain_tree() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i * 7 % 11) as f64, (i % 3) as f64]).collect();
        let y: Vec<usize> = (0..30).map(|i| (i * 7 % 11) % 3).collect();
        let e = TreeEnsemble::fit(&x, &y, 3, 1, 0).unwrap();
        let t = DecisionTree::fit(&x, &y, 3).unwrap();
        assert_eq!(e.feature_importances(), t.feature_importances());
        for r in &x {
            assert_eq!(e.predict(r), t.predict(r));
        }
    }

    #[test]
    fn forest_is_deterministic() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, (i % 5) as f64, (i % 2) as f64]).collect();
        let y: Vec<usize> = (0..50).map(|i| usize::from(i > 24)).collect();
        let a = TreeEnsemble::fit(&x, &y, 2, 15, 4).unwrap();
        assert_eq!(a, TreeEnsemble::fit(&x, &y, 2, 15, 4).unwrap());
        assert!((a.feature_importances().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(a.predict(&[3.0, 3.0, 1.0]), 0);
    }
}
