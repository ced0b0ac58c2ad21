use super::RealMatrix;
use crate::{Error, Result};

/// Relative pivot threshold below which a column counts as dependent.
const RANK_TOL: f64 = 1e-10;

/// Householder QR factorisation of a tall real matrix (`rows ≥ cols`).
///
/// The factorisation is computed once and reused for any number of
/// right-hand sides; each solve returns the least-squares minimiser of
/// `‖A x − y‖₂`, which for full column rank equals `A⁺ y`.
#[derive(Clone, Debug)]
pub struct QrFactor {
    rows: usize,
    cols: usize,
    /// Packed Householder vectors below the diagonal, `R` on and above it.
    qr: Vec<f64>,
    /// Householder scaling factors.
    tau: Vec<f64>,
}

impl QrFactor {
    pub fn new(a: &RealMatrix) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        if n == 0 || m < n {
            return Err(Error::Shape(format!(
                "least squares needs rows >= cols > 0, got {m}x{n}"
            )));
        }
        let mut qr: Vec<f64> = (0..m * n).map(|i| a.get(i / n, i % n)).collect();
        if qr.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("design matrix has non-finite entries".into()));
        }
        let scale = qr.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let mut tau = vec![0.0; n];
        let mut rank = 0;

        for k in 0..n {
            let norm = (k..m).map(|i| qr[i * n + k].powi(2)).sum::<f64>().sqrt();
            if norm <= RANK_TOL * scale.max(f64::MIN_POSITIVE) {
                continue;
            }
            rank += 1;
            let alpha = if qr[k * n + k] > 0.0 { -norm } else { norm };
            let v0 = qr[k * n + k] - alpha;
            // v = (1, x_{k+1}/v0, …); H = I − tau v vᵀ
            for i in k + 1..m {
                qr[i * n + k] /= v0;
            }
            tau[k] = -v0 / alpha;
            qr[k * n + k] = alpha;
            for j in k + 1..n {
                let mut dot = qr[k * n + j];
                for i in k + 1..m {
                    dot += qr[i * n + k] * qr[i * n + j];
                }
                dot *= tau[k];
                qr[k * n + j] -= dot;
                for i in k + 1..m {
                    qr[i * n + j] -= dot * qr[i * n + k];
                }
            }
        }
        if rank < n {
            return Err(Error::RankDeficient { rank, cols: n });
        }
        Ok(Self {
            rows: m,
            cols: n,
            qr,
            tau,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let (m, n) = (self.rows, self.cols);
        if rhs.len() != m {
            return Err(Error::LengthMismatch {
                what: "right-hand side vs design rows",
                left: rhs.len(),
                right: m,
            });
        }
        let mut y = rhs.to_vec();
        // y ← Qᵀ y
        for k in 0..n {
            let mut dot = y[k];
            for i in k + 1..m {
                dot += self.qr[i * n + k] * y[i];
            }
            dot *= self.tau[k];
            y[k] -= dot;
            for i in k + 1..m {
                y[i] -= dot * self.qr[i * n + k];
            }
        }
        // R x = (Qᵀy)[..n]
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let mut s = y[k];
            for j in k + 1..n {
                s -= self.qr[k * n + j] * x[j];
            }
            x[k] = s / self.qr[k * n + k];
        }
        Ok(x)
    }
}

/// Least-squares solution of `A x ≈ y` for a full-column-rank tall `A`.
///
/// Rank-deficient designs are rejected rather than resolved to the
/// minimum-norm solution.
pub fn lstsq_solve(design: &RealMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    QrFactor::new(design)?.solve(rhs)
}

/// `‖A x − y‖₂`.
pub fn residual_norm(design: &RealMatrix, x: &[f64], rhs: &[f64]) -> f64 {
    design
        .mul_vec(x)
        .iter()
        .zip(rhs)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}
