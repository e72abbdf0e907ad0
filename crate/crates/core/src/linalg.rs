//! Small dense complex linear-algebra helpers shared by the rate modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// `log2(1 + x)` evaluated without cancellation for small `x`.
pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() * LOG2_E
}

/// `W = diag(sqrt(w)) · H · Hᴴ · diag(sqrt(w))`, the Hermitian form of `D·H·Hᴴ`.
pub fn weighted_gram(h: &CMatrix, weights: &[f64]) -> CMatrix {
    debug_assert_eq!(h.nrows(), weights.len());
    let mut g = h * h.adjoint();
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            g[(i, j)] *= (weights[i] * weights[j]).sqrt();
        }
    }
    g
}

/// `log2 det(I + W[idx, idx])` for a Hermitian positive semi-definite `W`.
///
/// `scratch` is reused across calls to avoid reallocating in subset loops.
pub fn log2_det_identity_plus_principal(
    w: &CMatrix,
    idx: &[usize],
    scratch: &mut Vec<Complex64>,
) -> f64 {
    let n = idx.len();
    if n == 0 {
        return 0.0;
    }
    scratch.clear();
    scratch.resize(n * n, Complex64::new(0.0, 0.0));
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            scratch[a * n + b] = w[(i, j)];
        }
        scratch[a * n + a] += 1.0;
    }
    cholesky_log2_det(scratch, n).unwrap_or_else(|| {
        let sub = CMatrix::from_fn(n, n, |a, b| scratch[a * n + b]);
        sub.determinant().norm().log2()
    })
}

/// `log2 det(I + W)` for Hermitian positive semi-definite `W`.
pub fn log2_det_identity_plus(w: &CMatrix) -> f64 {
    let idx: Vec<usize> = (0..w.nrows()).collect();
    log2_det_identity_plus_principal(w, &idx, &mut Vec::new())
}

/// In-place Cholesky of a row-major Hermitian matrix; returns `log2 det`.
fn cholesky_log2_det(a: &mut [Complex64], n: usize) -> Option<f64> {
    let mut acc = 0.0;
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let l = d.sqrt();
        a[j * n + j] = Complex64::new(l, 0.0);
        acc += l.ln();
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / l;
        }
    }
    Some(2.0 * acc * LOG2_E)
}

/// Inverse of a Hermitian positive definite matrix.
pub fn hpd_inverse(m: &CMatrix) -> Option<CMatrix> {
    match m.clone().cholesky() {
        Some(c) => Some(c.inverse()),
        None => m.clone().try_inverse(),
    }
}

/// Squared Euclidean norm of each row.
pub fn row_powers(h: &CMatrix) -> Vec<f64> {
    h.row_iter()
        .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_plus_diagonal_log_det() {
        let w = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(3.0, 0.0),
        ]));
        assert!((log2_det_identity_plus(&w) - 3.0).abs() < 1e-12);
        let mut scratch = Vec::new();
        assert!((log2_det_identity_plus_principal(&w, &[1], &mut scratch) - 2.0).abs() < 1e-12);
        assert_eq!(log2_det_identity_plus_principal(&w, &[], &mut scratch), 0.0);
    }

    #[test]
    fn weighted_gram_is_hermitian() {
        let h = CMatrix::from_fn(3, 3, |i, j| Complex64::new(i as f64 - j as f64, (i * j) as f64));
        let g = weighted_gram(&h, &[1.0, 0.5, 2.0]);
        assert!((&g - g.adjoint()).norm() < 1e-12);
    }
}
