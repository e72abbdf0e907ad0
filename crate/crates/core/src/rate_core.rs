//! Symmetric achievable rates of a Gaussian multiple-access relay stage and the
//! stage-by-stage recursion from the destination back to the sources.

use crate::error::{param, Error, Result};
use crate::linalg::{log2_1p, log2_det_identity_plus, log2_det_identity_plus_principal, row_powers, weighted_gram, CMatrix};
use crate::network::{LayeredNetwork, Path};
use std::fmt;

/// Rate of the next stage; the destination is modelled as an infinite-rate stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StageRate {
    Finite(f64),
    Infinite,
}

impl StageRate {
    pub fn finite(self) -> Option<f64> {
        match self {
            StageRate::Finite(r) => Some(r),
            StageRate::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantizationPolicy {
    /// `Q = 1`: quantize at the background noise level.
    NoiseLevel,
    /// `Q = K`.
    StageDepth,
    /// Per-relay Wyner-Ziv level matched to the next-stage rate.
    WynerZiv,
    /// Per-stage maximization of the resulting rate.
    Optimal,
    /// `values[k - 1]` is used at stage `k`.
    Fixed(Vec<f64>),
}

impl QuantizationPolicy {
    pub fn validate(&self, stages: usize) -> Result<()> {
        if let QuantizationPolicy::Fixed(values) = self {
            if values.len() != stages {
                return Err(param(
                    "policy",
                    format!("fixed policy has {} levels, expected K = {stages}", values.len()),
                ));
            }
            if let Some(q) = values.iter().find(|q| !(**q >= 0.0)) {
                return Err(param("policy", format!("quantization level {q} is negative")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            QuantizationPolicy::NoiseLevel => "noise_level",
            QuantizationPolicy::StageDepth => "stage_depth",
            QuantizationPolicy::WynerZiv => "wyner_ziv",
            QuantizationPolicy::Optimal => "optimal",
            QuantizationPolicy::Fixed(_) => "fixed",
        }
    }
}

impl fmt::Display for QuantizationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-stage symmetric rates `r_0 ..= r_K`; `r_{K+1}` is implicitly infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct RateLadder {
    rates: Vec<f64>,
    q_levels: Vec<Vec<f64>>,
}

impl RateLadder {
    /// `rates[k] = r_k` for `k = 0..=K`; `q_levels[k - 1]` holds the levels of stage `k`.
    pub fn new(rates: Vec<f64>, q_levels: Vec<Vec<f64>>) -> Result<Self> {
        if rates.is_empty() || q_levels.len() + 1 != rates.len() {
            return Err(param(
                "rates",
                format!("{} rates need {} stages of levels, got {}", rates.len(), rates.len().saturating_sub(1), q_levels.len()),
            ));
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::Numerical(format!("stage rate {r} is not a finite non-negative value")));
        }
        Ok(RateLadder { rates, q_levels })
    }

    pub fn stages(&self) -> usize {
        self.rates.len() - 1
    }

    /// `r_k` for `k = 0..=K+1`.
    pub fn rate(&self, k: usize) -> Option<StageRate> {
        if k < self.rates.len() {
            Some(StageRate::Finite(self.rates[k]))
        } else if k == self.rates.len() {
            Some(StageRate::Infinite)
        } else {
            None
        }
    }

    /// Achievable symmetric source rate `r_0`.
    pub fn source_rate(&self) -> f64 {
        self.rates[0]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn q_levels(&self) -> &[Vec<f64>] {
        &self.q_levels
    }
}

/// Symmetric rate supported by one relay stage given the rate `r_next` the next
/// stage can forward and the quantization levels `q` of the receiving relays.
///
/// Returns `max(0, min_S (1/L) [sum_{j in S} (r_next - log2(1 + 1/Q_j)) +
/// log2 det(I + D H(S^c) H(S^c)^H)])` with `D = diag(p_tx / (1 + Q_j))`. An
/// infinite `Q_j` drops relay `j` from the determinant. An infinite `r_next`
/// requires all-zero `q` and only keeps the `S = {}` term.
pub fn marc_symmetric_rate(h: &CMatrix, r_next: StageRate, q: &[f64], p_tx: f64) -> Result<f64> {
    let l = h.nrows();
    if l == 0 {
        return Err(param("H", "empty channel matrix"));
    }
    if q.len() != l {
        return Err(param("Q", format!("expected {l} quantization levels, got {}", q.len())));
    }
    if !(p_tx > 0.0 && p_tx.is_finite()) {
        return Err(param("p_tx", format!("must be positive and finite, got {p_tx}")));
    }
    if let Some(bad) = q.iter().find(|v| !(**v >= 0.0)) {
        return Err(param("Q", format!("quantization level {bad} is negative")));
    }
    let r = match r_next {
        StageRate::Infinite => {
            if q.iter().any(|v| *v != 0.0) {
                return Err(Error::Domain("the destination stage has no quantization; Q must be zero".into()));
            }
            let w = weighted_gram(h, &vec![p_tx; l]);
            return Ok((log2_det_identity_plus(&w) / l as f64).max(0.0));
        }
        StageRate::Finite(r) => r,
    };
    if !(r >= 0.0 && r.is_finite()) {
        return Err(param("r_next", format!("must be finite and non-negative, got {r}")));
    }
    if q.iter().any(|v| *v == 0.0) {
        return Err(Error::Domain("Q = 0 is only defined for the destination stage".into()));
    }
    if l > 24 {
        return Err(param("L", format!("subset enumeration supports L <= 24, got {l}")));
    }

    let weights: Vec<f64> = q
        .iter()
        .map(|&qj| if qj.is_infinite() { 0.0 } else { p_tx / (1.0 + qj) })
        .collect();
    let costs: Vec<f64> = q.iter().map(|&qj| r - log2_1p(1.0 / qj)).collect();
    let w = weighted_gram(h, &weights);

    let mut best = f64::INFINITY;
    let mut complement = Vec::with_capacity(l);
    let mut scratch = Vec::new();
    for mask in 0u32..(1u32 << l) {
        complement.clear();
        let mut value = 0.0;
        for j in 0..l {
            if mask & (1 << j) != 0 {
                value += costs[j];
            } else {
                complement.push(j);
            }
        }
        value += log2_det_identity_plus_principal(&w, &complement, &mut scratch);
        best = best.min(value);
    }
    if !best.is_finite() {
        return Err(Error::Numerical(format!("subset minimum is {best}")));
    }
    Ok((best / l as f64).max(0.0))
}

/// Wyner-Ziv level `(1 + P sum_l |h_{j,l}|^2) / (2^r - 1)` for each receiving relay.
pub fn wyner_ziv_levels(h: &CMatrix, r_next: f64, p_tx: f64) -> Vec<f64> {
    let denom = r_next.exp2() - 1.0;
    row_powers(h).into_iter().map(|g| (1.0 + g * p_tx) / denom).collect()
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const GRID_POINTS: usize = 33;
const SEARCH_TOL: f64 = 1e-9;

/// Maximize `f` over `[lo, hi]` on a log grid, then refine with golden section
/// on the neighbouring interval. Returns `(argmax, max)`.
fn maximize_log_scale(lo: f64, hi: f64, f: &mut dyn FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let (a, b) = (lo.ln(), hi.ln());
    if !(a.is_finite() && b.is_finite()) || b <= a {
        let v = f(lo)?;
        return Ok((lo, v));
    }
    let step = (b - a) / (GRID_POINTS - 1) as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut values = Vec::with_capacity(GRID_POINTS);
    for i in 0..GRID_POINTS {
        let v = f((a + step * i as f64).exp())?;
        values.push(v);
        if v > best.1 {
            best = (i, v);
        }
    }
    let mut x0 = a + step * best.0.saturating_sub(1) as f64;
    let mut x3 = a + step * (best.0 + 1).min(GRID_POINTS - 1) as f64;
    let mut x1 = x3 - GOLDEN * (x3 - x0);
    let mut x2 = x0 + GOLDEN * (x3 - x0);
    let mut f1 = f(x1.exp())?;
    let mut f2 = f(x2.exp())?;
    while x3 - x0 > SEARCH_TOL {
        if f1 >= f2 {
            x3 = x2;
            x2 = x1;
            f2 = f1;
            x1 = x3 - GOLDEN * (x3 - x0);
            f1 = f(x1.exp())?;
        } else {
            x0 = x1;
            x1 = x2;
            f1 = f2;
            x2 = x0 + GOLDEN * (x3 - x0);
            f2 = f(x2.exp())?;
        }
    }
    let (x, v) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if v >= best.1 {
        Ok((x.exp(), v))
    } else {
        Ok(((a + step * best.0 as f64).exp(), best.1))
    }
}

/// Best quantization levels for one stage and the rate they achieve.
///
/// Searches a uniform level over `[Q_min, Q_max]`, a family proportional to the
/// relays' received power, and the fixed candidates `1`, `K` and Wyner-Ziv.
pub fn optimal_levels(h: &CMatrix, r_next: f64, p_tx: f64, stages: usize) -> Result<(Vec<f64>, f64)> {
    let l = h.nrows();
    let denom = r_next.exp2() - 1.0;
    let received: Vec<f64> = row_powers(h).into_iter().map(|g| 1.0 + g * p_tx).collect();
    let max_rx = received.iter().copied().fold(1.0, f64::max);
    let eval = |q: &[f64]| marc_symmetric_rate(h, StageRate::Finite(r_next), q, p_tx);

    let mut best_q = vec![1.0; l];
    let mut best_r = eval(&best_q)?;
    let mut consider = |q: Vec<f64>, r: f64| {
        if r > best_r {
            best_r = r;
            best_q = q;
        }
    };

    let wz = wyner_ziv_levels(h, r_next, p_tx);
    let depth = vec![stages.max(1) as f64; l];
    let r_wz = eval(&wz)?;
    consider(wz, r_wz);
    let r_depth = eval(&depth)?;
    consider(depth, r_depth);

    let q_min = 1.0 / denom;
    let q_max = max_rx / denom;
    let (q, r) = maximize_log_scale(q_min, q_max, &mut |q| eval(&vec![q; l]))?;
    consider(vec![q; l], r);

    let scaled = |t: f64| received.iter().map(|g| t * g).collect::<Vec<f64>>();
    let (t, r) = maximize_log_scale(q_min / max_rx, 4.0 / denom, &mut |t| eval(&scaled(t)))?;
    consider(scaled(t), r);

    Ok((best_q, best_r))
}

fn stage_levels(
    policy: &QuantizationPolicy,
    h: &CMatrix,
    r_next: f64,
    p_tx: f64,
    stage: usize,
    stages: usize,
) -> Result<(Vec<f64>, f64)> {
    let l = h.nrows();
    let q = match policy {
        QuantizationPolicy::NoiseLevel => vec![1.0; l],
        QuantizationPolicy::StageDepth => vec![stages as f64; l],
        QuantizationPolicy::WynerZiv => wyner_ziv_levels(h, r_next, p_tx),
        QuantizationPolicy::Fixed(values) => vec![values[stage - 1]; l],
        QuantizationPolicy::Optimal => return optimal_levels(h, r_next, p_tx, stages),
    };
    let r = marc_symmetric_rate(h, StageRate::Finite(r_next), &q, p_tx)?;
    Ok((q, r))
}

/// Run the recursion over explicit hop matrices (`hops[k]` maps stage `k` to `k + 1`).
pub fn run_recursion_on(hops: &[CMatrix], p_tx: f64, policy: &QuantizationPolicy) -> Result<RateLadder> {
    let Some(last) = hops.last() else {
        return Err(param("hops", "at least one hop is required"));
    };
    let stages = hops.len() - 1;
    policy.validate(stages)?;
    let l = last.nrows();
    let mut rates = vec![0.0; stages + 1];
    let mut q_levels = vec![vec![f64::INFINITY; l]; stages];
    rates[stages] = marc_symmetric_rate(last, StageRate::Infinite, &vec![0.0; l], p_tx)?;
    for k in (1..=stages).rev() {
        let r_k = rates[k];
        if r_k <= 0.0 {
            // nothing left to forward: every earlier stage is also at zero
            break;
        }
        let (q, r) = stage_levels(policy, &hops[k - 1], r_k, p_tx, k, stages)?;
        q_levels[k - 1] = q;
        rates[k - 1] = r;
    }
    RateLadder::new(rates, q_levels)
}

/// Rate ladder of one path of a network.
pub fn run_recursion(net: &LayeredNetwork, path: Path, policy: &QuantizationPolicy) -> Result<RateLadder> {
    let hops: Vec<CMatrix> = net.path_matrices(path).iter().map(|m| m.entries().clone()).collect();
    run_recursion_on(&hops, net.tx_power(), policy)
}

/// Symmetric source rate of a network: the mean of the two paths' `r_0`, as
/// the paths alternate slots.
pub fn network_rate(net: &LayeredNetwork, policy: &QuantizationPolicy) -> Result<f64> {
    let mut sum = 0.0;
    for path in Path::BOTH {
        sum += run_recursion(net, path, policy)?.source_rate();
    }
    Ok(sum / 2.0)
}

/// Multihop-routing rate in the sparse model: each route sees two neighbours as noise.
pub fn mr_rate_sparse(snr: f64, alpha: f64) -> f64 {
    log2_1p(snr / (1.0 + 2.0 * alpha * alpha * snr))
}

/// Multihop-routing rate in the dense model: `2L - 2` interferers per receiver.
pub fn mr_rate_dense(snr: f64, sources: usize) -> f64 {
    let interferers = 2.0 * sources as f64 - 2.0;
    log2_1p(snr / (1.0 + interferers * snr))
}
