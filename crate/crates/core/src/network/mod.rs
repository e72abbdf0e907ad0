//! Layered network topologies and their per-hop channel matrices.
//!
//! A network has `L` sources, `K` relay stages and two disjoint relay paths.
//! Each path carries `K + 1` desired channel matrices: hop `k` connects the
//! transmitters of stage `k` (stage 0 = sources) to the receivers of stage
//! `k + 1` (stage `K + 1` = the destination antennas).

mod grid;
mod text;

pub use grid::{ClusterGrid, Node, RelaySite, GRID_ROWS};
pub use text::{parse_network, write_network, NetworkDump};

use crate::error::{param, Error, Result};
use crate::linalg::CMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt;

/// One of the two disjoint relay paths used by alternating time slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Path {
    First,
    Second,
}

impl Path {
    pub const BOTH: [Path; 2] = [Path::First, Path::Second];

    /// Zero-based index, for array access.
    pub fn index(self) -> usize {
        match self {
            Path::First => 0,
            Path::Second => 1,
        }
    }

    /// One-based path number as used in relay labels.
    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn other(self) -> Path {
        match self {
            Path::First => Path::Second,
            Path::Second => Path::First,
        }
    }

    pub fn from_number(n: u8) -> Option<Path> {
        match n {
            1 => Some(Path::First),
            2 => Some(Path::Second),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    /// Tridiagonal `(alpha, 1, alpha)` band, linear array without wrap-around.
    SparseWyner { alpha: f64 },
    /// i.i.d. unit-variance circularly-symmetric complex Gaussian entries.
    DenseIid,
    /// Random-phase links on a 4 x K cluster grid, `sqrt(snr) e^{j theta}` in range.
    ClusterGrid {
        relays_per_cluster: usize,
        phase_seed: u64,
    },
}

impl ChannelModel {
    pub fn default_power_rule(&self) -> PowerRule {
        match self {
            ChannelModel::SparseWyner { .. } => PowerRule::PerNode,
            ChannelModel::DenseIid => PowerRule::PerNodeScaled,
            ChannelModel::ClusterGrid { .. } => PowerRule::Unit,
        }
    }
}

/// Transmit power convention applied on top of the channel gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerRule {
    /// `P_tx = snr`.
    PerNode,
    /// `P_tx = snr / L`.
    PerNodeScaled,
    /// `P_tx = 1`; the gains already carry the SNR.
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub sources: usize,
    pub stages: usize,
    /// Linear power ratio.
    pub snr: f64,
    pub model: ChannelModel,
    pub power_rule: PowerRule,
    pub allow_power_mismatch: bool,
}

impl NetworkParams {
    /// Parameters with the power rule the model is normally paired with.
    pub fn new(sources: usize, stages: usize, snr: f64, model: ChannelModel) -> Self {
        NetworkParams {
            sources,
            stages,
            snr,
            power_rule: model.default_power_rule(),
            model,
            allow_power_mismatch: false,
        }
    }

    pub fn with_power_rule(mut self, rule: PowerRule) -> Self {
        self.power_rule = rule;
        self
    }

    /// Accept a power rule that differs from the model's usual pairing.
    pub fn allow_power_mismatch(mut self) -> Self {
        self.allow_power_mismatch = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources == 0 {
            return Err(param("L", "at least one source is required"));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(param("snr", format!("must be positive and finite, got {}", self.snr)));
        }
        match self.model {
            ChannelModel::SparseWyner { alpha } => {
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(param("alpha", format!("must be non-negative, got {alpha}")));
                }
            }
            ChannelModel::DenseIid => {}
            ChannelModel::ClusterGrid {
                relays_per_cluster, ..
            } => {
                if relays_per_cluster < self.sources {
                    return Err(param(
                        "n_c",
                        format!(
                            "relays per cluster ({relays_per_cluster}) must be at least L ({})",
                            self.sources
                        ),
                    ));
                }
            }
        }
        if !self.allow_power_mismatch && self.power_rule != self.model.default_power_rule() {
            return Err(param(
                "power_rule",
                format!(
                    "{:?} does not match the {:?} model (expected {:?}); set the override to force it",
                    self.power_rule,
                    self.model,
                    self.model.default_power_rule()
                ),
            ));
        }
        Ok(())
    }

    /// Per-node transmit power `P_tx`.
    pub fn tx_power(&self) -> f64 {
        match self.power_rule {
            PowerRule::PerNode => self.snr,
            PowerRule::PerNodeScaled => self.snr / self.sources as f64,
            PowerRule::Unit => 1.0,
        }
    }

    /// Interference-to-noise ratio `alpha^2 * snr` of the Wyner model.
    pub fn inr(&self) -> Option<f64> {
        match self.model {
            ChannelModel::SparseWyner { alpha } => Some(alpha * alpha * self.snr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    /// `H`: stage `k` transmitters to stage `k + 1` receivers on the same path.
    Desired,
    /// `G`: next-stage transmitters back into stage `k` on the same path.
    IntraPathInterference,
    /// `S`: same-stage transmitters of the other path.
    InterPathInterference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: CMatrix,
    kind: ChannelKind,
    stage: usize,
    path: Path,
}

impl ChannelMatrix {
    pub fn new(entries: CMatrix, kind: ChannelKind, stage: usize, path: Path) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(param(
                "entries",
                format!("channel matrix must be square and non-empty, got {}x{}", entries.nrows(), entries.ncols()),
            ));
        }
        Ok(ChannelMatrix {
            entries,
            kind,
            stage,
            path,
        })
    }

    /// Desired-kind matrix detached from any network position.
    pub fn desired(entries: CMatrix) -> Result<Self> {
        Self::new(entries, ChannelKind::Desired, 0, Path::First)
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn path(&self) -> Path {
        self.path
    }

    /// `sum_l |h[row][l]|^2`.
    pub fn row_power(&self, row: usize) -> Result<f64> {
        if row >= self.dim() {
            return Err(Error::Index {
                what: "row",
                index: row,
                limit: self.dim(),
            });
        }
        Ok(self.entries.row(row).iter().map(|z| z.norm_sqr()).sum())
    }
}

/// An immutable `(K+1)`-hop, `2L`-layer network.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredNetwork {
    params: NetworkParams,
    desired: [Vec<ChannelMatrix>; 2],
    seed: u64,
}

impl LayeredNetwork {
    /// Assemble a network from explicit per-path hop matrices.
    pub fn from_stages(params: NetworkParams, stages: [Vec<CMatrix>; 2], seed: u64) -> Result<Self> {
        params.validate()?;
        let [first, second] = stages;
        let mut desired: [Vec<ChannelMatrix>; 2] = [Vec::new(), Vec::new()];
        for (path, mats) in Path::BOTH.into_iter().zip([first, second]) {
            if mats.len() != params.stages + 1 {
                return Err(param(
                    "stages",
                    format!(
                        "path {} has {} hop matrices, expected K+1 = {}",
                        path.number(),
                        mats.len(),
                        params.stages + 1
                    ),
                ));
            }
            for (stage, m) in mats.into_iter().enumerate() {
                if m.nrows() != params.sources {
                    return Err(param(
                        "entries",
                        format!("hop {stage} matrix is {}x{}, expected L = {}", m.nrows(), m.ncols(), params.sources),
                    ));
                }
                desired[path.index()].push(ChannelMatrix::new(m, ChannelKind::Desired, stage, path)?);
            }
        }
        Ok(LayeredNetwork {
            params,
            desired,
            seed,
        })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn sources(&self) -> usize {
        self.params.sources
    }

    pub fn stages(&self) -> usize {
        self.params.stages
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tx_power(&self) -> f64 {
        self.params.tx_power()
    }

    /// The `K + 1` hop matrices of one path, source hop first.
    pub fn path_matrices(&self, path: Path) -> &[ChannelMatrix] {
        &self.desired[path.index()]
    }

    pub fn desired(&self, path: Path, stage: usize) -> Result<&ChannelMatrix> {
        self.desired[path.index()].get(stage).ok_or(Error::Index {
            what: "stage",
            index: stage,
            limit: self.params.stages + 1,
        })
    }

    /// Interference matrices are not modelled; rates do not depend on them.
    pub fn interference(&self, path: Path, stage: usize, kind: ChannelKind) -> Result<ChannelMatrix> {
        if kind == ChannelKind::Desired {
            return self.desired(path, stage).cloned();
        }
        if stage > self.params.stages {
            return Err(Error::Index {
                what: "stage",
                index: stage,
                limit: self.params.stages + 1,
            });
        }
        let l = self.params.sources;
        ChannelMatrix::new(CMatrix::zeros(l, l), kind, stage, path)
    }
}

impl fmt::Display for LayeredNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&write_network(self))
    }
}

/// Stream identifier for a hop, counted from the destination so that networks
/// differing only in `K` share their last hops.
fn hop_stream(path: Path, hops_from_destination: usize) -> u64 {
    ((path.index() as u64) << 32) | hops_from_destination as u64
}

pub fn build_network(params: &NetworkParams, seed: u64) -> Result<LayeredNetwork> {
    params.validate()?;
    let l = params.sources;
    let k = params.stages;
    let stages: [Vec<CMatrix>; 2] = match params.model {
        ChannelModel::SparseWyner { alpha } => {
            let h = wyner_matrix(l, alpha);
            [vec![h.clone(); k + 1], vec![h; k + 1]]
        }
        ChannelModel::DenseIid => Path::BOTH.map(|path| {
            (0..=k)
                .map(|hop| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(hop_stream(path, k - hop));
                    gaussian_matrix(l, &mut rng)
                })
                .collect()
        }),
        ChannelModel::ClusterGrid {
            relays_per_cluster,
            phase_seed,
        } => {
            let grid = ClusterGrid::new(GRID_ROWS, k, relays_per_cluster, l, params.snr, phase_seed)?;
            let [first, second] = grid.compact_layout()?;
            [grid.stage_matrices(&first)?, grid.stage_matrices(&second)?]
        }
    };
    LayeredNetwork::from_stages(params.clone(), stages, seed)
}

/// `(alpha, 1, alpha)` tridiagonal matrix.
pub fn wyner_matrix(l: usize, alpha: f64) -> CMatrix {
    CMatrix::from_fn(l, l, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else if i.abs_diff(j) == 1 {
            Complex64::new(alpha, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn gaussian_matrix(l: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    // filled row by row so the draw order is independent of nalgebra's storage
    let mut values = Vec::with_capacity(l * l);
    for _ in 0..l * l {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        values.push(Complex64::new(re * scale, im * scale));
    }
    CMatrix::from_row_slice(l, l, &values)
}

/// `sum_l |h^{row,l}|^2` of the desired matrix at `(path, stage)`.
pub fn stage_row_power(net: &LayeredNetwork, path: Path, stage: usize, row: usize) -> Result<f64> {
    net.desired(path, stage)?.row_power(row)
}
