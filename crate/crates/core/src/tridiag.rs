//! Top of the spectrum of a symmetric matrix via Householder reduction,
//! Sturm-sequence bisection and inverse iteration.
//!
//! The Fantope projection only needs the eigenpairs whose eigenvalue exceeds
//! the capped-simplex shift, usually a handful out of `p`. Results are
//! checked (residual and orthogonality on the tridiagonal) and the caller
//! falls back to a full decomposition when this path declines.

use nalgebra::linalg::SymmetricTridiagonal;
use nalgebra::{DMatrix, DVector};

use crate::fantope::capped_simplex_shift;

/// Below this size the full decomposition is cheap enough.
pub(crate) const MIN_DIM: usize = 24;

const CLUSTER_GAP: f64 = 1e-3;
const CHECK_TOL: f64 = 1e-12;

struct Tridiagonal {
    d: Vec<f64>,
    e: Vec<f64>,
    norm: f64,
    pivmin: f64,
}

impl Tridiagonal {
    fn new(d: Vec<f64>, e: Vec<f64>) -> Self {
        let p = d.len();
        let mut norm: f64 = 0.0;
        for i in 0..p {
            let left = if i > 0 { e[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < p { e[i].abs() } else { 0.0 };
            norm = norm.max(d[i].abs() + left + right);
        }
        let emax = e.iter().fold(0.0f64, |m, x| m.max(x * x));
        Self {
            d,
            e,
            norm,
            pivmin: f64::MIN_POSITIVE * emax.max(1.0),
        }
    }

    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.d[0] - x;
        if q.abs() < self.pivmin {
            q = -self.pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.d.len() {
            q = self.d[i] - x - self.e[i - 1] * self.e[i - 1] / q;
            if q.abs() < self.pivmin {
                q = -self.pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let p = self.d.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..p {
            let left = if i > 0 { self.e[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < p { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - left - right);
            hi = hi.max(self.d[i] + left + right);
        }
        let pad = 2.0 * f64::EPSILON * self.norm * p as f64 + self.pivmin;
        (lo - pad, hi + pad)
    }

    /// The `j`-th smallest eigenvalue (0-based) by bisection on `[lo, hi]`,
    /// which must contain it. Absolute accuracy is a few ulps of `‖T‖`.
    fn eigenvalue_in(&self, j: usize, mut lo: f64, mut hi: f64) -> f64 {
        let tol = 4.0 * f64::EPSILON * self.norm + self.pivmin;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(T − λI) x = b` in place by Gaussian elimination with partial
    /// pivoting. Zero pivots are replaced by a tiny multiple of the norm.
    fn solve_shifted(&self, lambda: f64, b: &mut [f64]) {
        let n = self.d.len();
        let tiny = f64::EPSILON * self.norm.max(f64::MIN_POSITIVE);
        let mut diag: Vec<f64> = self.d.iter().map(|x| x - lambda).collect();
        let mut sup = self.e.clone();
        let mut sub = self.e.clone();
        let mut sup2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if diag[i].abs() >= sub[i].abs() {
                if diag[i] == 0.0 {
                    diag[i] = tiny;
                }
                let m = sub[i] / diag[i];
                sub[i] = m;
                diag[i + 1] -= m * sup[i];
            } else {
                let m = diag[i] / sub[i];
                diag[i] = sub[i];
                sub[i] = m;
                let old_sup = sup[i];
                sup[i] = diag[i + 1];
                diag[i + 1] = old_sup - m * sup[i];
                if i + 2 < n {
                    sup2[i] = sup[i + 1];
                    sup[i + 1] *= -m;
                }
                swapped[i] = true;
            }
        }
        if diag[n - 1] == 0.0 {
            diag[n - 1] = tiny;
        }
        for i in 0..n - 1 {
            if swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= sub[i] * b[i];
        }
        b[n - 1] /= diag[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - sup[n - 2] * b[n - 1]) / diag[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - sup[i] * b[i + 1] - sup2[i] * b[i + 2]) / diag[i];
        }
    }

    fn residual(&self, lambda: f64, x: &[f64]) -> f64 {
        let n = self.d.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let mut r = (self.d[i] - lambda) * x[i];
            if i > 0 {
                r += self.e[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                r += self.e[i] * x[i + 1];
            }
            worst = worst.max(r.abs());
        }
        worst
    }
}

fn normalize(x: &mut [f64]) -> bool {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    true
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Deterministic start vector with no special structure.
fn start_vector(n: usize, k: usize) -> Vec<f64> {
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ (k as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// Eigenpairs of symmetric `a` whose eigenvalue exceeds the capped-simplex
/// shift `θ` of the whole spectrum, descending. These are exactly the pairs
/// with nonzero weight in the Fantope projection. `None` when the matrix is
/// (numerically) reducible or the computed pairs fail the accuracy checks.
pub(crate) fn fantope_eigenpairs(a: &DMatrix<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let p = a.nrows();
    if p < 2 {
        return None;
    }
    let (q, d, e) = SymmetricTridiagonal::new(a.clone()).unpack();
    let t = Tridiagonal::new(d.iter().copied().collect(), e.iter().copied().collect());
    if t.norm == 0.0 || t.e.iter().any(|x| x.abs() <= 1e-13 * t.norm) {
        return None;
    }

    // Descending eigenvalues until the next one cannot carry weight. Adding
    // eigenvalues only moves the shift up, so once λ_next ≤ θ(found so far)
    // the remaining ones are all below the final shift.
    let (g_lo, g_hi) = t.gershgorin();
    let slack = 8.0 * f64::EPSILON * t.norm + t.pivmin;
    let top = t.eigenvalue_in(p - 1, g_lo, g_hi);
    let floor = (top - 1.0 - slack).max(g_lo);
    let mut values = vec![top];
    for j in (0..p - 1).rev() {
        let prev = values[values.len() - 1];
        let lambda = t.eigenvalue_in(j, floor, prev + slack);
        if lambda <= capped_simplex_shift(&values) {
            break;
        }
        values.push(lambda);
    }

    let k = values.len();
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (i, &lambda) in values.iter().enumerate() {
        // Earlier vectors whose eigenvalues are close enough to need explicit
        // reorthogonalization.
        let cluster: Vec<usize> = (0..i)
            .filter(|&j| (values[j] - lambda).abs() <= CLUSTER_GAP * t.norm)
            .collect();
        let mut x = start_vector(p, i);
        for _ in 0..3 {
            t.solve_shifted(lambda, &mut x);
            for &j in &cluster {
                let c = dot(&x, &vectors[j]);
                x.iter_mut().zip(&vectors[j]).for_each(|(v, w)| *v -= c * w);
            }
            if !normalize(&mut x) {
                return None;
            }
        }
        if t.residual(lambda, &x) > CHECK_TOL * t.norm * p as f64 {
            return None;
        }
        if vectors.iter().any(|w| dot(w, &x).abs() > CHECK_TOL * p as f64) {
            return None;
        }
        vectors.push(x);
    }

    let y = DMatrix::from_fn(p, k, |r, c| vectors[c][r]);
    Some((DVector::from_vec(values), q * y))
}
