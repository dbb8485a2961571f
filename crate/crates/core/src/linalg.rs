//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// `(A + Aᵀ) / 2`. The result is exactly symmetric in floating point.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let p = a.nrows();
    debug_assert_eq!(p, a.ncols());
    let mut out = a.clone();
    for j in 0..p {
        for i in (j + 1)..p {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Sum of element-wise products, i.e. `trace(AᵀB)`.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn l1_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
/// Eigenvectors are the columns of the returned matrix, in the same order.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if !all_finite(a.as_slice()) {
        return Err(Error::NonFinite("matrix passed to eigendecomposition"));
    }
    let p = a.nrows();
    let decompose = |m: DMatrix<f64>| {
        SymmetricEigen::try_new(m, f64::EPSILON, 10_000 * p.max(1))
            .filter(|e| all_finite(e.eigenvalues.as_slice()) && all_finite(e.eigenvectors.as_slice()))
    };
    // The QR sweep can produce NaN when entries span hundreds of orders of
    // magnitude. Entries below ε²·max|a| move eigenvalues far less than
    // rounding does, so flushing them and retrying is harmless.
    let eig = decompose(a.clone())
        .or_else(|| {
            let floor = f64::EPSILON * f64::EPSILON * a.amax();
            decompose(a.map(|v| if v.abs() < floor { 0.0 } else { v }))
        })
        .ok_or(Error::Eigendecomposition)?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Sign-fixes `v` in place so that its largest-magnitude entry is nonnegative.
/// Among entries of equal magnitude the lowest index decides.
pub fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.len() > 0 && v[best] < 0.0 {
        v.neg_mut();
    }
}
