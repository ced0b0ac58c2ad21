//! Time-ordered products of 2×2 factors.
//!
//! Factors are given in time order `[M_0, M_1, …, M_{N−1}]`; later factors
//! multiply on the left, so the cumulative product at step `j` is
//! `M_j · M_{j−1} ⋯ M_0`.
//!
//! Both the scan and the reduction run in `O(log N)` rounds in which every
//! multiplication is independent of the others in the same round. Inputs
//! whose length is not a power of two behave as if padded with identities
//! at the end; the padded slots are never materialised.

use rayon::prelude::*;

use super::ComplexMat2;
use crate::{Error, Result};

/// Rounds with at least this many independent products are spread over the
/// rayon pool. Below it the per-task overhead exceeds a 2×2 product.
const PAR_ROUND_MIN: usize = 8192;

/// Inclusive time-ordered prefix products (Brent–Kung schedule).
pub fn prefix_scan_products(factors: &[ComplexMat2]) -> Result<Vec<ComplexMat2>> {
    if factors.is_empty() {
        return Err(Error::Empty("prefix scan needs at least one factor"));
    }
    let mut a = factors.to_vec();
    prefix_scan_in_place(&mut a);
    Ok(a)
}

/// In-place variant of [`prefix_scan_products`]; a no-op on empty input.
pub fn prefix_scan_in_place(a: &mut [ComplexMat2]) {
    let n = a.len();
    if n < 2 {
        return;
    }
    let levels = usize::BITS - (n - 1).leading_zeros();

    // Up-sweep: a[k·2h + 2h − 1] ← a[k·2h + 2h − 1] · a[k·2h + h − 1]
    for d in 0..levels {
        let half = 1usize << d;
        let stride = half << 1;
        let round = n / stride;
        let op = |c: &mut [ComplexMat2]| c[stride - 1] = c[stride - 1] * c[half - 1];
        if round >= PAR_ROUND_MIN {
            a.par_chunks_exact_mut(stride).for_each(op);
        } else {
            a.chunks_exact_mut(stride).for_each(op);
        }
    }

    // Down-sweep: a[k·2h + 2h − 1 + h] ← a[…] · a[k·2h + 2h − 1]
    for d in (0..levels.saturating_sub(1)).rev() {
        let half = 1usize << d;
        let stride = half << 1;
        let tail = &mut a[stride - 1..];
        let round = tail.len() / stride;
        let op = |c: &mut [ComplexMat2]| {
            if c.len() > half {
                c[half] = c[half] * c[0];
            }
        };
        if round >= PAR_ROUND_MIN {
            tail.par_chunks_mut(stride).for_each(op);
        } else {
            tail.chunks_mut(stride).for_each(op);
        }
    }
}

/// Time-ordered product `M_{N−1} ⋯ M_0` by pairwise (binary-tree) reduction.
pub fn tree_reduce_product(factors: &[ComplexMat2]) -> Result<ComplexMat2> {
    if factors.is_empty() {
        return Err(Error::Empty("tree reduction needs at least one factor"));
    }
    let mut level: Vec<ComplexMat2> = factors.to_vec();
    tree_reduce_in_place(&mut level);
    Ok(level[0])
}

/// Reduces `buf` in place; the product ends up in `buf[0]`. Panics on empty input.
pub fn tree_reduce_in_place(buf: &mut Vec<ComplexMat2>) {
    assert!(!buf.is_empty());
    while buf.len() > 1 {
        let n = buf.len();
        let pairs = n / 2;
        if pairs >= PAR_ROUND_MIN {
            let next: Vec<ComplexMat2> = buf
                .par_chunks(2)
                .map(|c| if c.len() == 2 { c[1] * c[0] } else { c[0] })
                .collect();
            *buf = next;
        } else {
            for i in 0..pairs {
                buf[i] = buf[2 * i + 1] * buf[2 * i];
            }
            if n % 2 == 1 {
                buf[pairs] = buf[n - 1];
                buf.truncate(pairs + 1);
            } else {
                buf.truncate(pairs);
            }
        }
    }
}

/// Sequential left-accumulated products; the reference path for the scan.
pub fn sequential_products(factors: &[ComplexMat2]) -> Vec<ComplexMat2> {
    let mut out = Vec::with_capacity(factors.len());
    let mut acc = ComplexMat2::identity();
    for m in factors {
        acc = *m * acc;
        out.push(acc);
    }
    out
}

/// Sequential fold `M_{N−1} ⋯ M_0`; identity for an empty slice.
pub fn sequential_fold(factors: &[ComplexMat2]) -> ComplexMat2 {
    factors
        .iter()
        .fold(ComplexMat2::identity(), |acc, m| *m * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn counter_mats(n: usize) -> Vec<ComplexMat2> {
        // non-commuting, non-unitary factors so that any ordering slip shows up
        (0..n)
            .map(|k| {
                let t = k as f64 * 0.37 + 0.1;
                ComplexMat2::new(
                    Complex64::new(t.cos(), 0.2),
                    Complex64::new(0.3, t.sin()),
                    Complex64::new(-0.1 * t, 0.5),
                    Complex64::new(1.0, -0.05 * t),
                )
                .scale_real(0.8)
            })
            .collect()
    }

    #[test]
    fn identities_stay_identities() {
        let out = prefix_scan_products(&[ComplexMat2::identity(); 3]).unwrap();
        assert_eq!(out, vec![ComplexMat2::identity(); 3]);
    }

    #[test]
    fn later_factor_multiplies_on_left() {
        let out = prefix_scan_products(&[ComplexMat2::sigma_x(), ComplexMat2::sigma_z()]).unwrap();
        assert_eq!(out[0], ComplexMat2::sigma_x());
        let i_sigma_y = ComplexMat2::sigma_y().scale(Complex64::new(0.0, 1.0));
        assert_eq!(out[1], i_sigma_y);
    }

    #[test]
    fn scan_matches_sequential_for_every_small_length() {
        for n in 1..=70 {
            let f = counter_mats(n);
            let scan = prefix_scan_products(&f).unwrap();
            let seq = sequential_products(&f);
            for (j, (a, b)) in scan.iter().zip(&seq).enumerate() {
                assert!(a.distance(b) < 1e-12, "n={n} j={j}");
            }
            let tree = tree_reduce_product(&f).unwrap();
            assert!(tree.distance(&seq[n - 1]) < 1e-12, "n={n}");
        }
    }

    #[test]
    fn parallel_rounds_agree_with_sequential() {
        let n = 2 * PAR_ROUND_MIN + 5;
        let f: Vec<_> = (0..n)
            .map(|k| {
                let t = k as f64;
                super::super::expm_pauli(0.1, t.sin(), (0.7 * t).cos(), 0.3, 0.05)
            })
            .collect();
        let scan = prefix_scan_products(&f).unwrap();
        let seq = sequential_products(&f);
        let worst = scan
            .iter()
            .zip(&seq)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn singleton_and_involution() {
        let a = counter_mats(1)[0];
        assert_eq!(tree_reduce_product(&[a]).unwrap(), a);
        let x = ComplexMat2::sigma_x();
        assert_eq!(tree_reduce_product(&[x, x]).unwrap(), ComplexMat2::identity());
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(prefix_scan_products(&[]).is_err());
        assert!(tree_reduce_product(&[]).is_err());
    }
}
