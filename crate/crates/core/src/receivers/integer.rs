//! Gaussian-integer coefficient search for integer forcing.
//!
//! Up to `EXHAUSTIVE_MAX_L` users every vector with `|Re|, |Im| <= max_int` is
//! scored; beyond that the candidates are the columns of an LLL-reduced basis
//! of the real-valued form of the lattice.

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use nalgebra::DMatrix;
use num_complex::{Complex, Complex64};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub type IntMatrix = DMatrix<Complex<i64>>;

pub(crate) const GZERO: Complex<i64> = Complex { re: 0, im: 0 };
pub(crate) const EXHAUSTIVE_MAX_L: usize = 4;
const LLL_DELTA: f64 = 0.75;

pub(crate) fn identity(l: usize) -> IntMatrix {
    IntMatrix::from_fn(l, l, |i, j| if i == j { Complex::new(1, 0) } else { GZERO })
}

pub(crate) fn to_complex(a: &IntMatrix) -> CMatrix {
    a.map(|z| Complex64::new(z.re as f64, z.im as f64))
}

type G = Complex<i128>;

/// Exact quotient in the Gaussian integers; `None` if `b` does not divide `a`.
fn exact_div(a: G, b: G) -> Option<G> {
    let n = b.norm_sqr();
    let num = a * b.conj();
    (num.re % n == 0 && num.im % n == 0).then(|| G::new(num.re / n, num.im / n))
}

/// Rank over the Gaussian integers by fraction-free (Bareiss) elimination.
pub fn gaussian_rank(a: &IntMatrix) -> usize {
    let rows = a.nrows();
    let cols = a.ncols();
    let mut m: Vec<Vec<G>> = (0..rows)
        .map(|i| (0..cols).map(|j| G::new(a[(i, j)].re as i128, a[(i, j)].im as i128)).collect())
        .collect();
    let mut prev = G::new(1, 0);
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&i| m[i][c] != G::new(0, 0)) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank][c];
        for i in rank + 1..rows {
            let factor = m[i][c];
            for j in c + 1..cols {
                let v = pivot * m[i][j] - factor * m[rank][j];
                m[i][j] = match exact_div(v, prev) {
                    Some(q) => q,
                    None => return float_rank(a),
                };
            }
            m[i][c] = G::new(0, 0);
        }
        prev = pivot;
        rank += 1;
    }
    rank
}

fn float_rank(a: &IntMatrix) -> usize {
    to_complex(a).rank(1e-9)
}

struct Candidates {
    dim: usize,
    ints: Vec<Complex<i64>>,
    floats: Vec<Complex64>,
}

/// All nonzero vectors with bounded entries whose first nonzero entry lies in
/// the first quadrant, one representative per unit multiple.
fn candidates(l: usize, max_int: u32) -> Arc<Candidates> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u32), Arc<Candidates>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(c) = cache.lock().expect("candidate cache poisoned").get(&(l, max_int)) {
        return Arc::clone(c);
    }
    let b = max_int as i64;
    let values: Vec<Complex<i64>> = (-b..=b).flat_map(|re| (-b..=b).map(move |im| Complex::new(re, im))).collect();
    let base = values.len();
    let mut ints = Vec::new();
    let mut digits = vec![0usize; l];
    let total = base.pow(l as u32);
    for _ in 0..total {
        let v: Vec<Complex<i64>> = digits.iter().map(|&d| values[d]).collect();
        if let Some(first) = v.iter().find(|z| **z != GZERO) {
            if first.re > 0 && first.im >= 0 {
                ints.extend_from_slice(&v);
            }
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < base {
                break;
            }
            *d = 0;
        }
    }
    let floats = ints.iter().map(|z| Complex64::new(z.re as f64, z.im as f64)).collect();
    let entry = Arc::new(Candidates { dim: l, ints, floats });
    cache
        .lock()
        .expect("candidate cache poisoned")
        .insert((l, max_int), Arc::clone(&entry));
    entry
}

/// Upper-triangular `R` with `M = R^H R`.
fn cholesky_upper(m: &CMatrix) -> Result<CMatrix> {
    let c = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("error covariance is not positive definite".into()))?;
    Ok(c.l().adjoint())
}

/// Greedily keep the lowest-variance vectors that raise the rank.
fn greedy_basis(l: usize, ordered: impl Iterator<Item = (Vec<Complex<i64>>, f64)>) -> Option<(IntMatrix, Vec<f64>)> {
    let mut rows: Vec<Complex<i64>> = Vec::with_capacity(l * l);
    let mut sigmas = Vec::with_capacity(l);
    for (v, s) in ordered {
        let n = sigmas.len();
        let mut trial = rows.clone();
        trial.extend_from_slice(&v);
        if gaussian_rank(&IntMatrix::from_row_slice(n + 1, l, &trial)) == n + 1 {
            rows = trial;
            sigmas.push(s);
            if sigmas.len() == l {
                return Some((IntMatrix::from_row_slice(l, l, &rows), sigmas));
            }
        }
    }
    None
}

/// Exhaustive search minimizing `a^H M a` row by row. `M` must be Hermitian
/// positive definite.
pub(crate) fn exhaustive_search(m: &CMatrix, max_int: u32) -> Result<Option<(IntMatrix, Vec<f64>)>> {
    let l = m.nrows();
    let r = cholesky_upper(m)?;
    let cands = candidates(l, max_int);
    debug_assert_eq!(cands.dim, l);
    let count = cands.floats.len() / l;
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(count);
    for c in 0..count {
        let a = &cands.floats[c * l..(c + 1) * l];
        let mut s = 0.0;
        for i in 0..l {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in i..l {
                acc += r[(i, j)] * a[j];
            }
            s += acc.norm_sqr();
        }
        scored.push((s, c));
    }
    let by_sigma = |x: &(f64, usize), y: &(f64, usize)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1));
    // almost always the first few dozen vectors contain a full-rank set
    let head = count.min(256);
    if head < count {
        scored.select_nth_unstable_by(head, by_sigma);
    }
    scored[..head].sort_unstable_by(by_sigma);
    let pick = |idx: &[(f64, usize)]| {
        greedy_basis(
            l,
            idx.iter().map(|&(s, c)| (cands.ints[c * l..(c + 1) * l].to_vec(), s)),
        )
    };
    if let Some(found) = pick(&scored[..head]) {
        return Ok(Some(found));
    }
    scored.sort_unstable_by(by_sigma);
    Ok(pick(&scored))
}

/// LLL reduction of the columns of `basis`. Returns the reduced basis and the
/// unimodular integer matrix `T` with `reduced = basis * T`.
pub fn lll_reduce(basis: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<i64>) {
    let n = basis.ncols();
    let mut b: Vec<Vec<f64>> = (0..n).map(|j| basis.column(j).iter().copied().collect()).collect();
    let mut t: Vec<Vec<i64>> = (0..n).map(|j| (0..n).map(|i| (i == j) as i64).collect()).collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();

    let gram_schmidt = |b: &[Vec<f64>]| -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut mu = vec![vec![0.0; n]; n];
        let mut star: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut norms = vec![0.0; n];
        for i in 0..n {
            let mut v = b[i].clone();
            for j in 0..i {
                mu[i][j] = if norms[j] > 0.0 { dot(&b[i], &star[j]) / norms[j] } else { 0.0 };
                for (vk, sk) in v.iter_mut().zip(&star[j]) {
                    *vk -= mu[i][j] * sk;
                }
            }
            norms[i] = dot(&v, &v);
            star.push(v);
        }
        (mu, norms)
    };

    let (mut mu, mut norms) = gram_schmidt(&b);
    let mut k = 1;
    let mut guard = 0usize;
    while k < n && guard < 100_000 {
        guard += 1;
        for j in (0..k).rev() {
            let q = mu[k][j].round();
            if q != 0.0 {
                let (bj, tj) = (b[j].clone(), t[j].clone());
                for (x, y) in b[k].iter_mut().zip(&bj) {
                    *x -= q * y;
                }
                for (x, y) in t[k].iter_mut().zip(&tj) {
                    *x -= q as i64 * y;
                }
                for i in 0..j {
                    mu[k][i] -= q * mu[j][i];
                }
                mu[k][j] -= q;
            }
        }
        if norms[k] >= (LLL_DELTA - mu[k][k - 1] * mu[k][k - 1]) * norms[k - 1] {
            k += 1;
        } else {
            b.swap(k, k - 1);
            t.swap(k, k - 1);
            (mu, norms) = gram_schmidt(&b);
            k = (k - 1).max(1);
        }
    }
    let reduced = DMatrix::from_fn(basis.nrows(), n, |i, j| b[j][i]);
    let tm = DMatrix::from_fn(n, n, |i, j| t[j][i]);
    (reduced, tm)
}

/// Candidates from an LLL-reduced real form of the lattice generated by `R`,
/// `M = R^H R`, completed with unit vectors if needed.
pub(crate) fn reduced_search(m: &CMatrix) -> Result<Option<(IntMatrix, Vec<f64>)>> {
    let l = m.nrows();
    let r = cholesky_upper(m)?;
    // a = x + i y maps to [Re(R a); Im(R a)] = [[Re R, -Im R], [Im R, Re R]] [x; y]
    let real = DMatrix::from_fn(2 * l, 2 * l, |i, j| {
        let z = r[(i % l, j % l)];
        match (i < l, j < l) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let (reduced, t) = lll_reduce(&real);
    let mut pool: Vec<(Vec<Complex<i64>>, f64)> = (0..2 * l)
        .map(|c| {
            let a: Vec<Complex<i64>> = (0..l).map(|i| Complex::new(t[(i, c)], t[(i + l, c)])).collect();
            (a, reduced.column(c).norm_squared())
        })
        .collect();
    for i in 0..l {
        let a: Vec<Complex<i64>> = (0..l).map(|j| if i == j { Complex::new(1, 0) } else { GZERO }).collect();
        pool.push((a, m[(i, i)].re));
    }
    pool.sort_by(|x, y| x.1.total_cmp(&y.1));
    Ok(greedy_basis(l, pool.into_iter()))
}
