//! Small exact linear algebra: 2×2 complex matrices, their exponentials,
//! time-ordered products, and a tall real least-squares solver.

mod expm;
mod lstsq;
mod mat2;
mod scan;

pub use expm::{expm_pauli, expm_skew, HERMITIAN_INPUT_TOL};
pub use lstsq::{lstsq_solve, residual_norm, QrFactor};
pub use mat2::{ComplexMat2, RealMatrix, DEFAULT_TOL};
pub use scan::{
    prefix_scan_in_place, prefix_scan_products, sequential_fold, sequential_products,
    tree_reduce_in_place, tree_reduce_product,
};
