//! Multinomial logistic regression by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::tree::check_training_set;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticParams {
    /// L2 penalty on the weights (not the intercepts).
    pub l2: f64,
    pub max_epochs: usize,
    /// Converged once an epoch lowers the loss by less than this.
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            max_epochs: 5000,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// One row per class: intercept, then one weight per feature.
    weights: Vec<Vec<f64>>,
    pub converged: bool,
    pub epochs: usize,
    /// Loss after each accepted epoch, starting with the initial loss.
    pub loss_history: Vec<f64>,
}

fn scores(w: &[Vec<f64>], row: &[f64]) -> Vec<f64> {
    w.iter()
        .map(|wc| wc[0] + wc[1..].iter().zip(row).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
}

/// Mean cross-entropy plus `l2/2 · ‖W‖²`, and optionally its gradient.
fn loss_and_grad(
    w: &[Vec<f64>],
    x: &[Vec<f64>],
    y: &[usize],
    l2: f64,
    grad: Option<&mut Vec<Vec<f64>>>,
) -> f64 {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut g = grad;
    if let Some(g) = g.as_deref_mut() {
        g.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 0.0));
    }
    for (row, &label) in x.iter().zip(y) {
        let mut z = scores(w, row);
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - z[label];
        if let Some(g) = g.as_deref_mut() {
            softmax_in_place(&mut z);
            for (c, gc) in g.iter_mut().enumerate() {
                let r = z[c] - if c == label { 1.0 } else { 0.0 };
                gc[0] += r / n;
                for (gj, xj) in gc[1..].iter_mut().zip(row) {
                    *gj += r * xj / n;
                }
            }
        }
    }
    let mut penalty = 0.0;
    for (c, wc) in w.iter().enumerate() {
        for (j, wj) in wc.iter().enumerate().skip(1) {
            penalty += wj * wj;
            if let Some(g) = g.as_deref_mut() {
                g[c][j] += l2 * wj;
            }
        }
    }
    loss / n + 0.5 * l2 * penalty
}

impl LogisticModel {
    /// Each epoch takes one gradient step whose size is found by Armijo
    /// backtracking, so the loss never increases. The trial step doubles
    /// after every accepted epoch.
    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: &LogisticParams) -> Result<Self> {
        let d = check_training_set(x, y, n_classes)?;
        if !(params.l2 >= 0.0 && params.tol >= 0.0) || params.max_epochs == 0 {
            return Err(Error::InvalidParameter("invalid logistic regression parameters".into()));
        }
        let mut w = vec![vec![0.0; d + 1]; n_classes];
        let mut g = w.clone();
        let mut loss = loss_and_grad(&w, x, y, params.l2, Some(&mut g));
        let mut history = vec![loss];
        let mut step = 1.0f64;
        let mut converged = false;
        let mut epochs = 0;
        while epochs < params.max_epochs {
            epochs += 1;
            let g2: f64 = g.iter().flatten().map(|v| v * v).sum();
            if g2 == 0.0 {
                converged = true;
                break;
            }
            let mut accepted = None;
            while step > 1e-12 {
                let trial: Vec<Vec<f64>> = w
                    .iter()
                    .zip(&g)
                    .map(|(wc, gc)| wc.iter().zip(gc).map(|(a, b)| a - step * b).collect())
                    .collect();
                let l = loss_and_grad(&trial, x, y, params.l2, None);
                if l <= loss - 1e-4 * step * g2 {
                    accepted = Some((trial, l));
                    break;
                }
                step *= 0.5;
            }
            let Some((trial, new_loss)) = accepted else {
                // no descent step exists at machine precision
                converged = true;
                break;
            };
            let decrease = loss - new_loss;
            w = trial;
            loss = loss_and_grad(&w, x, y, params.l2, Some(&mut g));
            history.push(loss);
            step = (step * 2.0).min(1e6);
            if decrease < params.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!("logistic regression stopped after {epochs} epochs without converging");
        }
        Ok(Self {
            weights: w,
            converged,
            epochs,
            loss_history: history,
        })
    }

    pub fn probabilities(&self, row: &[f64]) -> Vec<f64> {
        let mut z = scores(&self.weights, row);
        softmax_in_place(&mut z);
        z
    }

    /// Most probable class; ties go to the smallest class index.
    pub fn predict(&self, row: &[f64]) -> usize {
        let z = scores(&self.weights, row);
        let mut best = 0;
        for (c, v) in z.iter().enumerate() {
            if *v > z[best] {
                best = c;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<Vec<f64>>, Vec<usize>) {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 10.0 - 1.0, 0.3]).collect();
        let y: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        (x, y)
    }

    #[test]
    fn separable_two_class() {
        let (x, y) = separable();
        let m = LogisticModel::fit(&x, &y, 2, &LogisticParams::default()).unwrap();
        for (r, &c) in x.iter().zip(&y) {
            assert_eq!(m.predict(r), c);
        }
        let p = m.probabilities(&x[0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_never_increases() {
        let (x, y) = separable();
        let m = LogisticModel::fit(&x, &y, 2, &LogisticParams::default()).unwrap();
        assert!(m.loss_history.len() > 2);
        for w in m.loss_history.windows(2) {
            assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn three_class_convergence() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let c = (i % 3) as f64;
                vec![c - 1.0 + 0.01 * i as f64, (c - 1.0).abs()]
            })
            .collect();
        let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let params = LogisticParams {
            l2: 1e-2,
            ..LogisticParams::default()
        };
        let m = LogisticModel::fit(&x, &y, 3, &params).unwrap();
        assert!(m.converged);
        let acc = x.iter().zip(&y).filter(|(r, &c)| m.predict(r) == c).count();
        assert_eq!(acc, 30);
    }

    #[test]
    fn epoch_cap_reports_non_convergence() {
        let (x, y) = separable();
        let params = LogisticParams {
            l2: 0.0,
            max_epochs: 3,
            tol: 0.0,
        };
        let m = LogisticModel::fit(&x, &y, 2, &params).unwrap();
        assert!(!m.converged);
        assert_eq!(m.epochs, 3);
    }
}
