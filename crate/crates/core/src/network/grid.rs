//! The cluster-grid arena: `rows x K` clusters of `n_c` candidate relays.
//!
//! Column `c` holds the candidates for relay stage `c + 1`. Sources sit to the
//! left of column 0 and the destination to the right of column `K - 1`; both are
//! in range of every cluster in the adjacent column. Relays reach their own
//! cluster and the eight surrounding ones.

use crate::error::{param, Error, Result};
use crate::linalg::CMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

pub const GRID_ROWS: usize = 4;

/// Candidate relay `idx` in the cluster at `(row, col)`.
///
/// Ordering is column-major, which is also the tie-break order for routing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelaySite {
    pub col: usize,
    pub row: usize,
    pub idx: usize,
}

impl RelaySite {
    pub fn new(row: usize, col: usize, idx: usize) -> Self {
        RelaySite { col, row, idx }
    }

    /// Chebyshev distance between the clusters of two sites.
    pub fn cluster_distance(&self, other: &RelaySite) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }
}

impl fmt::Display for RelaySite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R({},{},{})", self.row, self.col, self.idx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Source(usize),
    Relay(RelaySite),
    /// Destination antenna.
    Destination(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGrid {
    rows: usize,
    cols: usize,
    relays_per_cluster: usize,
    sources: usize,
    snr: f64,
    seed: u64,
}

impl ClusterGrid {
    pub fn new(
        rows: usize,
        cols: usize,
        relays_per_cluster: usize,
        sources: usize,
        snr: f64,
        seed: u64,
    ) -> Result<Self> {
        if rows < 2 {
            return Err(param("rows", format!("need at least 2 cluster rows, got {rows}")));
        }
        if sources == 0 {
            return Err(param("L", "at least one source is required"));
        }
        if relays_per_cluster < sources {
            return Err(param(
                "n_c",
                format!("relays per cluster ({relays_per_cluster}) must be at least L ({sources})"),
            ));
        }
        if !(snr >= 0.0 && snr.is_finite()) {
            return Err(param("snr", format!("must be non-negative and finite, got {snr}")));
        }
        Ok(ClusterGrid {
            rows,
            cols,
            relays_per_cluster,
            sources,
            snr,
            seed,
        })
    }

    /// Grid with the standard four cluster rows.
    pub fn standard(cols: usize, relays_per_cluster: usize, sources: usize, snr: f64, seed: u64) -> Result<Self> {
        Self::new(GRID_ROWS, cols, relays_per_cluster, sources, snr, seed)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of cluster columns, equal to the number of relay stages.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn relays_per_cluster(&self) -> usize {
        self.relays_per_cluster
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn contains(&self, site: RelaySite) -> bool {
        site.row < self.rows && site.col < self.cols && site.idx < self.relays_per_cluster
    }

    /// All candidates of one column in tie-break order.
    pub fn relays_in_column(&self, col: usize) -> Vec<RelaySite> {
        let mut out = Vec::with_capacity(self.rows * self.relays_per_cluster);
        for row in 0..self.rows {
            for idx in 0..self.relays_per_cluster {
                out.push(RelaySite::new(row, col, idx));
            }
        }
        out
    }

    pub fn in_range(&self, tx: Node, rx: Node) -> bool {
        let last = self.cols.checked_sub(1);
        match (tx, rx) {
            (Node::Source(s), Node::Relay(r)) => s < self.sources && self.contains(r) && r.col == 0,
            (Node::Source(s), Node::Destination(a)) => s < self.sources && a < self.sources && self.cols == 0,
            (Node::Relay(r), Node::Destination(a)) => {
                a < self.sources && self.contains(r) && Some(r.col) == last
            }
            (Node::Relay(a), Node::Relay(b)) => {
                self.contains(a) && self.contains(b) && a != b && a.cluster_distance(&b) <= 1
            }
            _ => false,
        }
    }

    fn code(&self, node: Node) -> u64 {
        match node {
            Node::Source(s) => (1 << 40) | s as u64,
            Node::Destination(a) => (2 << 40) | a as u64,
            Node::Relay(r) => (3 << 40) | ((r.col * self.rows + r.row) * self.relays_per_cluster + r.idx) as u64,
        }
    }

    /// Phase of the `tx -> rx` link; a fixed function of the grid seed and the pair.
    pub fn phase(&self, tx: Node, rx: Node) -> f64 {
        let key = self.seed ^ self.code(tx).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(self.code(rx));
        rng.gen::<f64>() * std::f64::consts::TAU
    }

    /// `e^{j theta}` in range, zero otherwise.
    pub fn link(&self, tx: Node, rx: Node) -> Complex64 {
        if !self.in_range(tx, rx) {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(1.0, self.phase(tx, rx))
    }

    /// `sqrt(snr) e^{j theta}` in range, zero otherwise.
    pub fn gain(&self, tx: Node, rx: Node) -> Complex64 {
        self.link(tx, rx) * self.snr.sqrt()
    }

    /// Unit-magnitude link matrix with `rx` as rows and `tx` as columns.
    pub fn link_matrix(&self, tx: &[Node], rx: &[Node]) -> CMatrix {
        CMatrix::from_fn(rx.len(), tx.len(), |i, j| self.link(tx[j], rx[i]))
    }

    /// Gain matrix with `rx` as rows and `tx` as columns.
    pub fn gain_matrix(&self, tx: &[Node], rx: &[Node]) -> CMatrix {
        CMatrix::from_fn(rx.len(), tx.len(), |i, j| self.gain(tx[j], rx[i]))
    }

    /// Transmitting nodes of hop `hop` given one relay list per route.
    pub fn hop_transmitters(&self, routes: &[Vec<RelaySite>], hop: usize) -> Vec<Node> {
        if hop == 0 {
            (0..self.sources).map(Node::Source).collect()
        } else {
            routes.iter().map(|r| Node::Relay(r[hop - 1])).collect()
        }
    }

    /// Receiving nodes of hop `hop` given one relay list per route.
    pub fn hop_receivers(&self, routes: &[Vec<RelaySite>], hop: usize) -> Vec<Node> {
        if hop == self.cols {
            (0..self.sources).map(Node::Destination).collect()
        } else {
            routes.iter().map(|r| Node::Relay(r[hop])).collect()
        }
    }

    /// The `K + 1` hop matrices of one path; `routes[j]` lists the stage relays of route `j`.
    pub fn stage_matrices(&self, routes: &[Vec<RelaySite>]) -> Result<Vec<CMatrix>> {
        if routes.len() != self.sources {
            return Err(param("routes", format!("expected {} routes, got {}", self.sources, routes.len())));
        }
        for route in routes {
            if route.len() != self.cols {
                return Err(param("routes", format!("route has {} relays, expected K = {}", route.len(), self.cols)));
            }
            for (stage, site) in route.iter().enumerate() {
                if !self.contains(*site) || site.col != stage {
                    return Err(Error::Index {
                        what: "relay",
                        index: stage,
                        limit: self.cols,
                    });
                }
            }
        }
        Ok((0..=self.cols)
            .map(|hop| self.gain_matrix(&self.hop_transmitters(routes, hop), &self.hop_receivers(routes, hop)))
            .collect())
    }

    /// Fixed layout used when no routing is run: the two paths occupy the two
    /// middle rows and each route takes relay `j` of every cluster in its row.
    pub fn compact_layout(&self) -> Result<[Vec<Vec<RelaySite>>; 2]> {
        let first_row = (self.rows - 1) / 2;
        Ok([first_row, first_row + 1].map(|row| {
            (0..self.sources)
                .map(|j| (0..self.cols).map(|col| RelaySite::new(row, col, j)).collect())
                .collect()
        }))
    }
}
