//! Small dense linear-algebra helpers shared across the crate.
//!
//! Matrices live in `ndarray`; the Hermitian eigensolve is delegated to
//! `nalgebra`, which is pure Rust and needs no system LAPACK.

use ndarray as nd;
use num_complex::Complex64 as C64;

/// Conjugate transpose.
pub fn dagger(m: &nd::ArrayView2<C64>) -> nd::Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// Largest entrywise deviation from Hermiticity, max |m - m†|.
pub fn herm_deviation(m: &nd::ArrayView2<C64>) -> f64 {
    let d = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            dev = dev.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    dev
}

pub fn trace(m: &nd::ArrayView2<C64>) -> C64 {
    m.diag().sum()
}

/// Multiply-accumulate `out += coeff · a · b` without allocating.
///
/// Plain ikj loop over contiguous rows; the operands here are small dense
/// square matrices (dim ≤ ~100) where this beats going through a BLAS shim.
pub fn mac_into(
    a: &nd::ArrayView2<C64>,
    b: &nd::ArrayView2<C64>,
    coeff: C64,
    out: &mut nd::Array2<C64>,
) {
    let (n, m) = (a.nrows(), b.ncols());
    let inner = a.ncols();
    debug_assert_eq!(inner, b.nrows());
    debug_assert_eq!((n, m), (out.nrows(), out.ncols()));
    for i in 0..n {
        for k in 0..inner {
            let w = coeff * a[[i, k]];
            if w.re == 0.0 && w.im == 0.0 {
                continue;
            }
            let mut row = out.row_mut(i);
            for j in 0..m {
                row[j] += w * b[[k, j]];
            }
        }
    }
}

/// Eigenvalues of a Hermitian matrix, ascending. The input is symmetrized
/// (ρ ↦ (ρ+ρ†)/2) so that integrator round-off cannot poison the solver.
pub fn eigvalsh(m: &nd::ArrayView2<C64>) -> Vec<f64> {
    let d = m.nrows();
    let h = nalgebra::DMatrix::from_fn(d, d, |i, j| 0.5 * (m[[i, j]] + m[[j, i]].conj()));
    let mut vals: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().cloned().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}
