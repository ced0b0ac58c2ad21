use super::tree::check_training_set;
use crate::{Error, Result};

/// k-nearest-neighbour classifier with the Euclidean metric.
#[derive(Clone, Debug)]
pub struct Knn {
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    n_classes: usize,
    k: usize,
}

impl Knn {
    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, k: usize) -> Result<Self> {
        check_training_set(x, y, n_classes)?;
        if k == 0 || k > x.len() {
            return Err(Error::InvalidParameter(format!(
                "k = {k} must be between 1 and the training size {}",
                x.len()
            )));
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            n_classes,
            k,
        })
    }

    /// Majority vote among the `k` nearest training rows (distance ties go
    /// to the earlier row). Vote ties go to the class with the smallest
    /// summed distance, then to the smallest class index.
    pub fn predict(&self, row: &[f64]) -> usize {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let s: f64 = r.iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum();
                (s.sqrt(), i)
            })
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; self.n_classes];
        let mut dist = vec![0.0f64; self.n_classes];
        for &(di, i) in &d[..self.k] {
            votes[self.y[i]] += 1;
            dist[self.y[i]] += di;
        }
        let mut best = 0;
        for c in 1..self.n_classes {
            if votes[c] > votes[best] || (votes[c] == votes[best] && dist[c] < dist[best]) {
                best = c;
            }
        }
        best
    }
}
