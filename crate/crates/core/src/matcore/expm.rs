use num_complex::Complex64;

use super::ComplexMat2;
use crate::{Error, Result};

/// Hermiticity tolerance accepted by [`expm_skew`], relative to `max(1, ‖h‖_F)`.
pub const HERMITIAN_INPUT_TOL: f64 = 1e-10;

/// Exact `exp(−i·h·dt)` for a Hermitian 2×2 `h`.
///
/// Writing `h = a·I + b·σ`, the exponential is
/// `e^{−i a dt} (cos(|b| dt)·I − i sin(|b| dt)·(b̂·σ))`.
pub fn expm_skew(h: &ComplexMat2, dt: f64) -> Result<ComplexMat2> {
    if !dt.is_finite() {
        return Err(Error::InvalidTimeStep(dt));
    }
    let deviation = h.hermiticity_defect();
    if !(deviation <= HERMITIAN_INPUT_TOL * h.frobenius_norm().max(1.0)) {
        return Err(Error::NotHermitian { deviation });
    }
    let (a, bx, by, bz) = h.pauli_coefficients();
    Ok(expm_pauli(a, bx, by, bz, dt))
}

/// `exp(−i (a·I + bx·σx + by·σy + bz·σz) dt)` from real Pauli coefficients.
#[inline]
pub fn expm_pauli(a: f64, bx: f64, by: f64, bz: f64, dt: f64) -> ComplexMat2 {
    let norm = (bx * bx + by * by + bz * bz).sqrt();
    let theta = norm * dt;
    let c = theta.cos();
    // sin(|b|dt)/|b|, with the limit dt as |b| → 0
    let s = if theta.abs() < 1e-8 {
        dt * (1.0 - theta * theta / 6.0)
    } else {
        theta.sin() / norm
    };
    let (sx, sy, sz) = (s * bx, s * by, s * bz);
    // c·I − i(sx σx + sy σy + sz σz)
    let rot = ComplexMat2::new(
        Complex64::new(c, -sz),
        Complex64::new(-sy, -sx),
        Complex64::new(sy, -sx),
        Complex64::new(c, sz),
    );
    if a == 0.0 {
        rot
    } else {
        rot.scale(Complex64::from_polar(1.0, -a * dt))
    }
}
