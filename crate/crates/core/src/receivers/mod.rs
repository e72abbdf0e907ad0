//! Stage-by-stage successive decoding with linear equalizers (ZF, MMSE,
//! integer forcing) and a quantized joint-ML benchmark.
//!
//! Each relay quantizes at the Wyner-Ziv level matched to its own forwarding
//! rate, so a stage is a MIMO MAC with per-dimension noise `1 + Q_j`.

mod integer;

pub use integer::{gaussian_rank, lll_reduce, IntMatrix};

use crate::error::{param, Error, Result};
use crate::linalg::{hpd_inverse, log2_1p, log2_det_identity_plus, row_powers, CMatrix};
use crate::network::{LayeredNetwork, Path};
use crate::rate_core::RateLadder;
use nalgebra::DVector;
use num_complex::Complex64;
use std::fmt;

pub const DEFAULT_MAX_INT: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverKind {
    Zf,
    Mmse,
    /// Integer forcing with Gaussian-integer coefficients bounded by `max_int`.
    IntegerForcing { max_int: u32 },
    MlQuantized,
}

impl ReceiverKind {
    pub fn integer_forcing() -> Self {
        ReceiverKind::IntegerForcing {
            max_int: DEFAULT_MAX_INT,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReceiverKind::Zf => "zf",
            ReceiverKind::Mmse => "mmse",
            ReceiverKind::IntegerForcing { .. } => "if",
            ReceiverKind::MlQuantized => "ml",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ReceiverKind::IntegerForcing { max_int: 0 } => Err(param("max_int", "must be at least 1")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `Y = H X + Z_q + Z` with per-dimension noise variance `1 + Q_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedStage {
    h: CMatrix,
    q: Vec<f64>,
    p_tx: f64,
}

impl QuantizedStage {
    pub fn new(h: CMatrix, q: Vec<f64>, p_tx: f64) -> Result<Self> {
        if h.nrows() != h.ncols() || h.nrows() == 0 {
            return Err(param("H", format!("must be square and non-empty, got {}x{}", h.nrows(), h.ncols())));
        }
        if q.len() != h.nrows() {
            return Err(param("Q", format!("expected {} levels, got {}", h.nrows(), q.len())));
        }
        if let Some(bad) = q.iter().find(|v| !(**v >= 0.0)) {
            return Err(param("Q", format!("quantization level {bad} is negative")));
        }
        if !(p_tx > 0.0 && p_tx.is_finite()) {
            return Err(param("p_tx", format!("must be positive and finite, got {p_tx}")));
        }
        Ok(QuantizedStage { h, q, p_tx })
    }

    pub fn h(&self) -> &CMatrix {
        &self.h
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p_tx(&self) -> f64 {
        self.p_tx
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// `P H^H N^{-1}` with `N = diag(1 + Q)`; infinite levels contribute nothing.
    fn scaled_adjoint(&self) -> CMatrix {
        let mut a = self.h.adjoint() * Complex64::new(self.p_tx, 0.0);
        for (j, q) in self.q.iter().enumerate() {
            let inv = if q.is_infinite() { 0.0 } else { 1.0 / (1.0 + q) };
            a.column_mut(j).scale_mut(inv);
        }
        a
    }

    /// `I + P H^H N^{-1} H`.
    fn information(&self) -> CMatrix {
        let l = self.dim();
        CMatrix::identity(l, l) + self.scaled_adjoint() * &self.h
    }

    /// MMSE error covariance `(I + P H^H N^{-1} H)^{-1}`.
    pub fn error_covariance(&self) -> Result<CMatrix> {
        hpd_inverse(&self.information()).ok_or_else(|| Error::Numerical("error covariance is not invertible".into()))
    }
}

/// Wyner-Ziv level `(1 + row_power * snr) / (2^r - 1)`.
pub fn wyner_ziv_q(row_power: f64, snr: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("Wyner-Ziv level needs a positive rate, got {r}")));
    }
    Ok((1.0 + row_power * snr) / (r * std::f64::consts::LN_2).exp_m1())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equalizer {
    pub b: CMatrix,
    /// Integer coefficient matrix (integer forcing only).
    pub a: Option<IntMatrix>,
}

/// `B = (I + P H^H N^{-1} H)^{-1} P H^H N^{-1}`, equal to `H^H (N/P + H H^H)^{-1}`.
fn mmse_matrix(stage: &QuantizedStage) -> Result<CMatrix> {
    Ok(stage.error_covariance()? * stage.scaled_adjoint())
}

/// Equalizer `B` of a linear receiver; ML has no equalizer.
pub fn equalizer_matrix(kind: ReceiverKind, stage: &QuantizedStage) -> Result<Equalizer> {
    kind.validate()?;
    match kind {
        ReceiverKind::Zf => {
            let b = stage.h.clone().try_inverse().ok_or(Error::Singular)?;
            if b.iter().any(|z| !z.is_finite()) {
                return Err(Error::Singular);
            }
            Ok(Equalizer { b, a: None })
        }
        ReceiverKind::Mmse => Ok(Equalizer {
            b: mmse_matrix(stage)?,
            a: None,
        }),
        ReceiverKind::IntegerForcing { max_int } => {
            let (a, _) = integer_forcing(stage, max_int)?;
            let b = integer::to_complex(&a) * mmse_matrix(stage)?;
            Ok(Equalizer { b, a: Some(a) })
        }
        ReceiverKind::MlQuantized => Err(param("kind", "the ML receiver has no equalizer matrix")),
    }
}

/// `log2(1 + P |b h_j|^2 / (sum_l |b_l|^2 (1 + Q_l) + P sum_{l != j} |b h_l|^2))`.
pub fn stream_rate(b_row: &[Complex64], stage: &QuantizedStage, j: usize) -> Result<f64> {
    let l = stage.dim();
    if b_row.len() != l {
        return Err(param("b", format!("expected {l} coefficients, got {}", b_row.len())));
    }
    if j >= l {
        return Err(Error::Index {
            what: "stream",
            index: j,
            limit: l,
        });
    }
    let p = stage.p_tx;
    let gain = |col: usize| -> f64 {
        b_row
            .iter()
            .enumerate()
            .map(|(i, b)| b * stage.h[(i, col)])
            .sum::<Complex64>()
            .norm_sqr()
    };
    let mut noise = 0.0;
    for (b, q) in b_row.iter().zip(&stage.q) {
        let w = b.norm_sqr();
        // a zero coefficient ignores that dimension even if its noise is infinite
        if w > 0.0 {
            noise += w * (1.0 + q);
        }
    }
    let interference: f64 = (0..l).filter(|&m| m != j).map(|m| p * gain(m)).sum();
    let signal = p * gain(j);
    let denom = noise + interference;
    if signal == 0.0 || !denom.is_finite() {
        return Ok(0.0);
    }
    Ok(log2_1p(signal / denom))
}

fn computation_rate(sigma: f64) -> f64 {
    (-sigma.log2()).max(0.0)
}

/// Per-user rates supported by the integer matrix `a`.
///
/// Equation `m` decodes at `log2+(1 / a_m^H M a_m)` with `M` the MMSE error
/// covariance; user `l` gets the minimum over the equations that involve it.
pub fn integer_forcing_rates(stage: &QuantizedStage, a: &IntMatrix) -> Result<Vec<f64>> {
    let m = stage.error_covariance()?;
    let l = stage.dim();
    if a.nrows() != l || a.ncols() != l {
        return Err(param("A", format!("expected {l}x{l}, got {}x{}", a.nrows(), a.ncols())));
    }
    if gaussian_rank(a) < l {
        return Err(param("A", "integer matrix must have full rank"));
    }
    let ac = integer::to_complex(a);
    let eq_rates: Vec<f64> = (0..l)
        .map(|row| {
            let v: DVector<Complex64> = ac.row(row).adjoint();
            // rows of A act as a^T, so the quadratic form uses conj(a)
            computation_rate((v.adjoint() * &m * &v)[(0, 0)].re)
        })
        .collect();
    Ok(per_user(a, &eq_rates))
}

fn per_user(a: &IntMatrix, eq_rates: &[f64]) -> Vec<f64> {
    (0..a.ncols())
        .map(|user| {
            (0..a.nrows())
                .filter(|&row| a[(row, user)] != integer::GZERO)
                .map(|row| eq_rates[row])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Best integer matrix found and its per-user rates. `A = I` (plain MMSE) is
/// always a candidate, so integer forcing never does worse than MMSE in sum rate.
pub fn integer_forcing(stage: &QuantizedStage, max_int: u32) -> Result<(IntMatrix, Vec<f64>)> {
    if max_int == 0 {
        return Err(param("max_int", "must be at least 1"));
    }
    let l = stage.dim();
    let identity = integer::identity(l);
    let identity_rates = integer_forcing_rates(stage, &identity)?;
    let m = stage.error_covariance()?.map(|z| z.conj());
    let found = if l <= integer::EXHAUSTIVE_MAX_L {
        integer::exhaustive_search(&m, max_int)?
    } else {
        integer::reduced_search(&m)?
    };
    let Some((a, sigmas)) = found else {
        return Ok((identity, identity_rates));
    };
    let eq_rates: Vec<f64> = sigmas.iter().map(|s| computation_rate(*s)).collect();
    let rates = per_user(&a, &eq_rates);
    let sum = |r: &[f64]| r.iter().sum::<f64>();
    if sum(&rates) > sum(&identity_rates) {
        Ok((a, rates))
    } else {
        Ok((identity, identity_rates))
    }
}

/// Per-stream rates of one stage under a receiver.
pub fn stage_stream_rates(kind: ReceiverKind, stage: &QuantizedStage) -> Result<Vec<f64>> {
    kind.validate()?;
    let l = stage.dim();
    let rows = |b: &CMatrix| -> Result<Vec<f64>> {
        (0..l)
            .map(|j| {
                let row: Vec<Complex64> = b.row(j).iter().copied().collect();
                stream_rate(&row, stage, j)
            })
            .collect()
    };
    match kind {
        ReceiverKind::Zf => match equalizer_matrix(kind, stage) {
            Ok(eq) => rows(&eq.b),
            // a singular stage carries nothing under zero forcing
            Err(Error::Singular) => Ok(vec![0.0; l]),
            Err(e) => Err(e),
        },
        ReceiverKind::Mmse => rows(&mmse_matrix(stage)?),
        ReceiverKind::IntegerForcing { max_int } => Ok(integer_forcing(stage, max_int)?.1),
        ReceiverKind::MlQuantized => {
            let info = stage.information() - CMatrix::identity(l, l);
            Ok(vec![log2_det_identity_plus(&info) / l as f64; l])
        }
    }
}

/// Ladder with per-stream detail; the stage rate is the mean over streams.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverLadder {
    pub ladder: RateLadder,
    /// `streams[k][j]`: rate of stream `j` leaving stage `k`.
    pub streams: Vec<Vec<f64>>,
}

impl ReceiverLadder {
    pub fn source_rate(&self) -> f64 {
        self.ladder.source_rate()
    }
}

/// Receiver ladder over explicit hop matrices (`hops[k]` maps stage `k` to `k + 1`).
pub fn receiver_ladder_on(hops: &[CMatrix], p_tx: f64, kind: ReceiverKind) -> Result<ReceiverLadder> {
    kind.validate()?;
    let Some(last) = hops.last() else {
        return Err(param("hops", "at least one hop is required"));
    };
    let stages = hops.len() - 1;
    let l = last.nrows();
    let mut streams = vec![vec![0.0; l]; stages + 1];
    let mut q_levels = vec![vec![f64::INFINITY; l]; stages];
    streams[stages] = stage_stream_rates(kind, &QuantizedStage::new(last.clone(), vec![0.0; l], p_tx)?)?;
    for k in (1..=stages).rev() {
        let h = &hops[k - 1];
        // relay j quantizes for its own forwarding rate; a silent relay is dropped
        let q: Vec<f64> = row_powers(h)
            .into_iter()
            .zip(&streams[k])
            .map(|(g, &r)| if r > 0.0 { wyner_ziv_q(g, p_tx, r) } else { Ok(f64::INFINITY) })
            .collect::<Result<_>>()?;
        streams[k - 1] = stage_stream_rates(kind, &QuantizedStage::new(h.clone(), q.clone(), p_tx)?)?;
        q_levels[k - 1] = q;
    }
    let rates = streams.iter().map(|s| s.iter().sum::<f64>() / l as f64).collect();
    Ok(ReceiverLadder {
        ladder: RateLadder::new(rates, q_levels)?,
        streams,
    })
}

pub fn receiver_ladder(net: &LayeredNetwork, path: Path, kind: ReceiverKind) -> Result<ReceiverLadder> {
    let hops: Vec<CMatrix> = net.path_matrices(path).iter().map(|m| m.entries().clone()).collect();
    receiver_ladder_on(&hops, net.tx_power(), kind)
}

/// Mean of the two paths' source rates.
pub fn receiver_network_rate(net: &LayeredNetwork, kind: ReceiverKind) -> Result<f64> {
    let mut sum = 0.0;
    for path in Path::BOTH {
        sum += receiver_ladder(net, path, kind)?.source_rate();
    }
    Ok(sum / 2.0)
}

#[cfg(test)]
mod tests;
