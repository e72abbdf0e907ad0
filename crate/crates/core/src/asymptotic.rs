//! Large-`L` symmetric rates of the sparse (Wyner band) and dense (i.i.d.)
//! networks, where the per-stage rate reduces to scalar functions of the
//! quantization level.

use crate::error::{param, Error, Result};
use crate::linalg::{log2_1p, LOG2_E};
use crate::rate_core::{QuantizationPolicy, RateLadder};
use std::f64::consts::TAU;

const RESIDUAL_TOL: f64 = 1e-9;
const QUAD_TOL: f64 = 1e-12;
const QUAD_START: usize = 64;
const QUAD_MAX: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseParams {
    pub snr: f64,
    /// Interference coefficient; equal to the Wyner `alpha`.
    pub gamma: f64,
    pub stages: usize,
    pub policy: QuantizationPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// Total received SNR `L * P_tx`.
    pub snr: f64,
    pub stages: usize,
    pub policy: QuantizationPolicy,
}

fn check_snr(snr: f64) -> Result<()> {
    if snr > 0.0 && snr.is_finite() {
        Ok(())
    } else {
        Err(param("snr", format!("must be positive and finite, got {snr}")))
    }
}

/// Periodic trapezoid rule on `[0, 1)`, doubling the node count until two
/// successive estimates agree to `QUAD_TOL`.
fn periodic_mean(f: impl Fn(f64) -> f64) -> f64 {
    let mut n = QUAD_START;
    let mut sum: f64 = (0..n).map(|i| f(i as f64 / n as f64)).sum();
    let mut estimate = sum / n as f64;
    while n < QUAD_MAX {
        // the new nodes are the midpoints of the old ones
        let mid: f64 = (0..n).map(|i| f((i as f64 + 0.5) / n as f64)).sum();
        sum += mid;
        n *= 2;
        let next = sum / n as f64;
        let done = (next - estimate).abs() < QUAD_TOL;
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

fn f_with_factor(factor: f64, snr: f64, gamma: f64) -> f64 {
    if factor == 0.0 {
        return 0.0;
    }
    let a = snr * factor;
    periodic_mean(|theta| {
        let g = 1.0 + 2.0 * gamma * (TAU * theta).cos();
        log2_1p(a * g * g)
    })
}

/// `F(x) = int_0^1 log2(1 + snr (1 - 2^-x) (1 + 2 gamma cos 2 pi theta)^2) d theta`.
///
/// `x = +inf` evaluates the limit with the `(1 - 2^-x)` factor set to one.
pub fn eval_f(x: f64, snr: f64, gamma: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("F is defined for x >= 0, got {x}")));
    }
    check_snr(snr)?;
    let factor = if x.is_infinite() { 1.0 } else { -(-x * std::f64::consts::LN_2).exp_m1() };
    Ok(f_with_factor(factor, snr, gamma))
}

/// Solve `F(x) = r - x` on `[0, r]`; returns `x*`.
pub fn sparse_fixed_point(r: f64, snr: f64, gamma: f64) -> Result<f64> {
    let g = |x: f64| -> Result<f64> { Ok(eval_f(x, snr, gamma)? - (r - x)) };
    let (mut lo, mut hi) = (0.0, r);
    if g(hi)? < 0.0 {
        return Err(Error::Numerical(format!("F(r) < 0 at r = {r}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let residual = g(x)?.abs();
    if residual > RESIDUAL_TOL {
        return Err(Error::Numerical(format!("fixed-point residual {residual:e} at r = {r}")));
    }
    Ok(x)
}

/// `2^x - 1` without cancellation near zero.
fn exp2_m1(x: f64) -> f64 {
    (x * std::f64::consts::LN_2).exp_m1()
}

/// Compression rate `x = log2(1 + 1/Q)` implied by a quantization level.
fn compression(q: f64) -> f64 {
    log2_1p(1.0 / q)
}

fn sparse_level(policy: &QuantizationPolicy, r: f64, p: &SparseParams, stage: usize) -> f64 {
    match policy {
        QuantizationPolicy::NoiseLevel => 1.0,
        QuantizationPolicy::StageDepth => p.stages as f64,
        QuantizationPolicy::WynerZiv => (1.0 + p.snr * (1.0 + 2.0 * p.gamma * p.gamma)) / (r.exp2() - 1.0),
        QuantizationPolicy::Fixed(v) => v[stage - 1],
        QuantizationPolicy::Optimal => unreachable!("optimal level comes from the fixed point"),
    }
}

/// Per-stage rates of the sparse network for any policy.
///
/// Optimal solves the fixed point `F(x) = r_k - x`; the other policies evaluate
/// `min(r_k - x, F(x))` at the policy's level.
pub fn sparse_ladder(p: &SparseParams) -> Result<RateLadder> {
    check_snr(p.snr)?;
    if !(p.gamma >= 0.0 && p.gamma.is_finite()) {
        return Err(param("gamma", format!("must be non-negative, got {}", p.gamma)));
    }
    p.policy.validate(p.stages)?;
    let k_max = p.stages;
    let mut rates = vec![0.0; k_max + 1];
    let mut q_levels = vec![vec![f64::INFINITY]; k_max];
    rates[k_max] = eval_f(f64::INFINITY, p.snr, p.gamma)?;
    for k in (1..=k_max).rev() {
        let r = rates[k];
        if r <= 0.0 {
            break;
        }
        let (q, next) = if p.policy == QuantizationPolicy::Optimal {
            let x = sparse_fixed_point(r, p.snr, p.gamma)?;
            (1.0 / exp2_m1(x), eval_f(x, p.snr, p.gamma)?)
        } else {
            let q = sparse_level(&p.policy, r, p, k);
            if q == 0.0 {
                return Err(Error::Domain("Q = 0 is only defined for the destination stage".into()));
            }
            let x = compression(q);
            (q, (r - x).min(eval_f(x, p.snr, p.gamma)?).max(0.0))
        };
        q_levels[k - 1] = vec![q];
        rates[k - 1] = next;
    }
    RateLadder::new(rates, q_levels)
}

/// `C(x) = 2 log2((1 + s)/2) - log2(e) (s - 1)^2 / (4x)`, `s = sqrt(1 + 4x)`.
///
/// Evaluated as `log2(e) [2 ln(1 + 2x/(1+s)) - 4x/(1+s)^2]`, which is exact
/// algebraically and keeps full precision as `x -> 0`.
pub fn eval_c(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("C is defined for x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let s1 = 1.0 + (1.0 + 4.0 * x).sqrt();
    Ok(LOG2_E * (2.0 * (2.0 * x / s1).ln_1p() - 4.0 * x / (s1 * s1)))
}

/// One bisection solve of the dense optimal level.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverStep {
    pub stage: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub f_at_min: f64,
    pub f_at_max: f64,
    pub q_opt: f64,
    pub residual: f64,
}

fn dense_terms(r: f64, q: f64, snr: f64) -> Result<(f64, f64)> {
    Ok((r - compression(q), eval_c(snr / (1.0 + q))?))
}

/// Root of `f(Q) = r - log2(1 + 1/Q) - C(snr / (1 + Q))` on `[Q_min, Q_max]`.
pub fn dense_optimal_level(r: f64, snr: f64, stage: usize) -> Result<SolverStep> {
    let denom = exp2_m1(r);
    let q_min = 1.0 / denom;
    let q_max = (1.0 + snr) / denom;
    let f = |q: f64| -> Result<f64> {
        let (a, b) = dense_terms(r, q, snr)?;
        Ok(a - b)
    };
    let f_at_min = f(q_min)?;
    let f_at_max = f(q_max)?;
    if f_at_min > RESIDUAL_TOL || f_at_max < -RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "stage {stage}: bracket violated, f(Q_min) = {f_at_min:e}, f(Q_max) = {f_at_max:e}"
        )));
    }
    // f is increasing in Q; bisect in log Q since the bracket can span decades
    let (mut lo, mut hi) = (q_min.ln(), q_max.ln());
    let mut q = q_max;
    let mut value = f_at_max;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        q = mid.exp();
        value = f(q)?;
        if value.abs() <= RESIDUAL_TOL * 1e-3 || hi - lo < 1e-15 {
            break;
        }
        if value < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let residual = value.abs();
    if residual > RESIDUAL_TOL {
        return Err(Error::Numerical(format!("stage {stage}: bisection residual {residual:e}")));
    }
    Ok(SolverStep {
        stage,
        q_min,
        q_max,
        f_at_min,
        f_at_max,
        q_opt: q,
        residual,
    })
}

/// Dense-network ladder plus the optimal-level solves performed on the way.
pub fn dense_ladder_traced(p: &DenseParams) -> Result<(RateLadder, Vec<SolverStep>)> {
    check_snr(p.snr)?;
    p.policy.validate(p.stages)?;
    let k_max = p.stages;
    let mut rates = vec![0.0; k_max + 1];
    let mut q_levels = vec![vec![f64::INFINITY]; k_max];
    let mut steps = Vec::new();
    rates[k_max] = eval_c(p.snr)?;
    for k in (1..=k_max).rev() {
        let r = rates[k];
        if r <= 0.0 {
            break;
        }
        let q = match &p.policy {
            QuantizationPolicy::NoiseLevel => 1.0,
            QuantizationPolicy::StageDepth => k_max as f64,
            QuantizationPolicy::WynerZiv => (1.0 + p.snr) / exp2_m1(r),
            QuantizationPolicy::Fixed(v) => v[k - 1],
            QuantizationPolicy::Optimal => {
                let step = dense_optimal_level(r, p.snr, k)?;
                let q = step.q_opt;
                steps.push(step);
                q
            }
        };
        if q == 0.0 {
            return Err(Error::Domain("Q = 0 is only defined for the destination stage".into()));
        }
        let (a, b) = dense_terms(r, q, p.snr)?;
        q_levels[k - 1] = vec![q];
        rates[k - 1] = a.min(b).max(0.0);
    }
    Ok((RateLadder::new(rates, q_levels)?, steps))
}

pub fn dense_ladder(p: &DenseParams) -> Result<RateLadder> {
    dense_ladder_traced(p).map(|(ladder, _)| ladder)
}
