use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Default tolerance for the unitarity and Hermiticity predicates.
pub const DEFAULT_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A 2×2 complex matrix stored row-major: `[m00, m01, m10, m11]`.
///
/// Carries every single-qubit object in the crate: states, Hamiltonians,
/// propagators and observables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 4]", into = "[[f64; 2]; 4]")]
pub struct ComplexMat2(pub [Complex64; 4]);

impl ComplexMat2 {
    pub const fn new(m00: Complex64, m01: Complex64, m10: Complex64, m11: Complex64) -> Self {
        Self([m00, m01, m10, m11])
    }

    pub fn from_real(m00: f64, m01: f64, m10: f64, m11: f64) -> Self {
        Self([m00.into(), m01.into(), m10.into(), m11.into()])
    }

    pub const fn zero() -> Self {
        Self([ZERO; 4])
    }

    pub const fn identity() -> Self {
        Self([ONE, ZERO, ZERO, ONE])
    }

    pub const fn sigma_x() -> Self {
        Self([ZERO, ONE, ONE, ZERO])
    }

    pub const fn sigma_y() -> Self {
        Self([ZERO, Complex64::new(0.0, -1.0), I, ZERO])
    }

    pub const fn sigma_z() -> Self {
        Self([ONE, ZERO, ZERO, Complex64::new(-1.0, 0.0)])
    }

    /// `a·I + bx·σx + by·σy + bz·σz` for real coefficients.
    pub fn from_pauli(a: f64, bx: f64, by: f64, bz: f64) -> Self {
        Self([
            Complex64::new(a + bz, 0.0),
            Complex64::new(bx, -by),
            Complex64::new(bx, by),
            Complex64::new(a - bz, 0.0),
        ])
    }

    /// Real Pauli coefficients `(a, bx, by, bz)` of the Hermitian part.
    pub fn pauli_coefficients(&self) -> (f64, f64, f64, f64) {
        let [m00, m01, m10, m11] = self.0;
        let a = 0.5 * (m00.re + m11.re);
        let bz = 0.5 * (m00.re - m11.re);
        let bx = 0.5 * (m01.re + m10.re);
        let by = 0.5 * (m10.im - m01.im);
        (a, bx, by, bz)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[2 * row + col]
    }

    #[inline]
    pub fn dagger(&self) -> Self {
        let [m00, m01, m10, m11] = self.0;
        Self([m00.conj(), m10.conj(), m01.conj(), m11.conj()])
    }

    #[inline]
    pub fn trace(&self) -> Complex64 {
        self.0[0] + self.0[3]
    }

    pub fn determinant(&self) -> Complex64 {
        self.0[0] * self.0[3] - self.0[1] * self.0[2]
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖self − other‖_F`.
    pub fn distance(&self, other: &Self) -> f64 {
        (*self - *other).frobenius_norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `‖M − M†‖_F`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.distance(&self.dagger())
    }

    /// `‖M·M† − I‖_F`.
    pub fn unitarity_defect(&self) -> f64 {
        (*self * self.dagger()).distance(&Self::identity())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    /// `U · self · U†`.
    #[inline]
    pub fn conjugate_by(&self, u: &Self) -> Self {
        *u * *self * u.dagger()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> [f64; 2] {
        let (a, bx, by, bz) = self.pauli_coefficients();
        let r = (bx * bx + by * by + bz * bz).sqrt();
        [a - r, a + r]
    }
}

impl Default for ComplexMat2 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for ComplexMat2 {
    type Output = Self;

    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = rhs.0;
        Self([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }
}

impl Add for ComplexMat2 {
    type Output = Self;

    #[inline]
    fn add(self, rhs: Self) -> Self {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = rhs.0;
        Self([a + e, b + f, c + g, d + h])
    }
}

impl Sub for ComplexMat2 {
    type Output = Self;

    #[inline]
    fn sub(self, rhs: Self) -> Self {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = rhs.0;
        Self([a - e, b - f, c - g, d - h])
    }
}

impl Neg for ComplexMat2 {
    type Output = Self;

    fn neg(self) -> Self {
        Self(self.0.map(|z| -z))
    }
}

impl From<[[f64; 2]; 4]> for ComplexMat2 {
    fn from(v: [[f64; 2]; 4]) -> Self {
        Self(v.map(|[re, im]| Complex64::new(re, im)))
    }
}

impl From<ComplexMat2> for [[f64; 2]; 4] {
    fn from(m: ComplexMat2) -> Self {
        m.0.map(|z| [z.re, z.im])
    }
}

/// A dense real matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> crate::Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(crate::Error::Shape(format!(
                    "row {i} has {} entries, expected {ncols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (
            ComplexMat2::sigma_x(),
            ComplexMat2::sigma_y(),
            ComplexMat2::sigma_z(),
        );
        assert_eq!(x * x, ComplexMat2::identity());
        assert_eq!(y * y, ComplexMat2::identity());
        assert_eq!(z * z, ComplexMat2::identity());
        // σz·σx = iσy
        assert_eq!(z * x, y.scale(I));
        assert!(x.is_hermitian(0.0) && y.is_hermitian(0.0) && z.is_hermitian(0.0));
        assert!(y.is_unitary(1e-15));
    }

    #[test]
    fn pauli_coefficients_round_trip() {
        let m = ComplexMat2::from_pauli(0.3, -1.2, 0.7, 2.5);
        let (a, bx, by, bz) = m.pauli_coefficients();
        for (got, want) in [a, bx, by, bz].iter().zip([0.3, -1.2, 0.7, 2.5]) {
            assert!((got - want).abs() < 1e-15);
        }
        let top = m.hermitian_eigenvalues()[1];
        assert!((top - (0.3 + (1.44f64 + 0.49 + 6.25).sqrt())).abs() < 1e-14);
    }

    #[test]
    fn serde_as_pairs() {
        let json = serde_json::to_string(&ComplexMat2::sigma_y()).unwrap();
        assert_eq!(json, "[[0.0,0.0],[0.0,-1.0],[0.0,1.0],[0.0,0.0]]");
        let back: ComplexMat2 = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ComplexMat2::sigma_y());
    }

    #[test]
    fn real_matrix_rejects_ragged_rows() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(RealMatrix::from_rows(&rows).is_err());
    }
}
