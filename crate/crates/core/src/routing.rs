//! Relay selection on the cluster grid.
//!
//! Routes are established one at a time and stage by stage. The harnessing
//! metrics (MIMO capacity and its received-power surrogate) favour relays that
//! hear many of the already-chosen transmitters; the interference-aware
//! baseline favours relays that hear as few of them as possible. A sweep then
//! re-establishes each route in turn and keeps only improvements.

use crate::error::{Error, Result};
use crate::linalg::{log2_1p, log2_det_identity_plus, weighted_gram, CMatrix};
pub use crate::network::{ClusterGrid, Node, RelaySite};
use crate::network::Path;
use crate::rate_core::{run_recursion_on, QuantizationPolicy};
use num_complex::Complex64;
use std::collections::BTreeSet;
use std::fmt::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoutingMetric {
    MimoCapacity,
    ReceivedPower,
    InterferenceAware,
}

impl RoutingMetric {
    pub fn name(&self) -> &'static str {
        match self {
            RoutingMetric::MimoCapacity => "mimo_capacity",
            RoutingMetric::ReceivedPower => "received_power",
            RoutingMetric::InterferenceAware => "interference_aware",
        }
    }

    fn harnesses(&self) -> bool {
        !matches!(self, RoutingMetric::InterferenceAware)
    }
}

impl fmt::Display for RoutingMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `log2 det(I + snr H H^H)`.
pub fn mimo_capacity_metric(h: &CMatrix, snr: f64) -> f64 {
    log2_det_identity_plus(&weighted_gram(h, &vec![snr; h.nrows()]))
}

/// `snr * sum |h|^2` over a candidate's gains from the previous-stage transmitters.
pub fn received_power_metric(row: &[Complex64], snr: f64) -> f64 {
    snr * row.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// Established routes of both paths.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingState {
    /// `paths[p][j]` lists the `K` relays of source `j` on path `p`, stage 1 first.
    paths: [Vec<Vec<RelaySite>>; 2],
    metric: RoutingMetric,
    iterations: usize,
    /// Sum throughput of each path after every completed sweep, initial value first.
    history: [Vec<f64>; 2],
}

impl RoutingState {
    pub fn routes(&self, path: Path) -> &[Vec<RelaySite>] {
        &self.paths[path.index()]
    }

    pub fn metric(&self) -> RoutingMetric {
        self.metric
    }

    /// Improvement sweeps run over both paths.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn history(&self, path: Path) -> &[f64] {
        &self.history[path.index()]
    }

    /// Current sum-throughput estimate, averaged over the two paths.
    pub fn throughput(&self) -> f64 {
        Path::BOTH
            .iter()
            .map(|p| self.history[p.index()].last().copied().unwrap_or(0.0))
            .sum::<f64>()
            / 2.0
    }

    pub fn used_relays(&self) -> BTreeSet<RelaySite> {
        self.paths.iter().flatten().flatten().copied().collect()
    }

    /// One line per route: `path i: Sj -> R(row,col,idx) ... -> D`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for path in Path::BOTH {
            for (j, route) in self.routes(path).iter().enumerate() {
                let hops: Vec<String> = route.iter().map(|r| r.to_string()).collect();
                let mid = if hops.is_empty() { String::new() } else { format!("{} → ", hops.join(" → ")) };
                let _ = writeln!(out, "path {}: S{} → {mid}D", path.number(), j + 1);
            }
        }
        out
    }

    /// Text grid, one cell per cluster, listing `path.source` labels of the relays in it.
    pub fn render(&self, grid: &ClusterGrid) -> String {
        let mut cells = vec![vec![Vec::new(); grid.cols()]; grid.rows()];
        for path in Path::BOTH {
            for (j, route) in self.routes(path).iter().enumerate() {
                for site in route {
                    cells[site.row][site.col].push(format!("{}.{}", path.number(), j + 1));
                }
            }
        }
        let text: Vec<Vec<String>> = cells
            .into_iter()
            .map(|row| row.into_iter().map(|c| if c.is_empty() { ".".into() } else { c.join(" ") }).collect())
            .collect();
        let width = text.iter().flatten().map(|s| s.chars().count()).max().unwrap_or(1);
        let mut out = String::new();
        for row in text {
            let line: Vec<String> = row.iter().map(|c| format!("{c:<width$}")).collect();
            let _ = writeln!(out, "| {} |", line.join(" | "));
        }
        out
    }
}

/// Mean pairwise cluster distance between same-stage relays of the same path.
pub fn mean_cluster_distance(state: &RoutingState) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for path in Path::BOTH {
        let routes = state.routes(path);
        let stages = routes.first().map_or(0, |r| r.len());
        for k in 0..stages {
            for a in 0..routes.len() {
                for b in a + 1..routes.len() {
                    total += routes[a][k].cluster_distance(&routes[b][k]) as f64;
                    pairs += 1;
                }
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// Routes of the path being built; `None` marks a route not yet established.
type Partial = Vec<Option<Vec<RelaySite>>>;

struct Builder<'a> {
    grid: &'a ClusterGrid,
    metric: RoutingMetric,
    /// Fixed routes of the other path (empty while building path 1).
    other: &'a [Vec<RelaySite>],
}

impl Builder<'_> {
    fn transmitter(&self, source: usize, route: &[RelaySite], stage: usize) -> Node {
        if stage == 1 {
            Node::Source(source)
        } else {
            Node::Relay(route[stage - 2])
        }
    }

    /// Interferers of a stage-`stage` receiver on route `j`.
    fn interferers(&self, routes: &Partial, j: usize, stage: usize) -> Vec<Node> {
        let mut out = Vec::new();
        for (m, r) in routes.iter().enumerate() {
            if m == j {
                continue;
            }
            if stage == 1 {
                out.push(Node::Source(m));
            } else if let Some(r) = r {
                out.push(Node::Relay(r[stage - 2]));
            }
        }
        out.extend(self.other.iter().map(|r| Node::Relay(r[stage - 1])));
        out
    }

    fn score(&self, routes: &Partial, j: usize, partial: &[RelaySite], stage: usize, cand: RelaySite) -> f64 {
        let g = self.grid;
        let snr = g.snr();
        let own_tx = self.transmitter(j, partial, stage);
        let rx = Node::Relay(cand);
        match self.metric {
            RoutingMetric::InterferenceAware => {
                let signal = snr * g.link(own_tx, rx).norm_sqr();
                let interference: f64 = self
                    .interferers(routes, j, stage)
                    .into_iter()
                    .map(|t| snr * g.link(t, rx).norm_sqr())
                    .sum();
                log2_1p(signal / (1.0 + interference))
            }
            RoutingMetric::ReceivedPower | RoutingMetric::MimoCapacity => {
                let mut tx = vec![own_tx];
                let mut receivers = Vec::new();
                for (m, r) in routes.iter().enumerate() {
                    if let (true, Some(r)) = (m != j, r) {
                        tx.push(self.transmitter(m, r, stage));
                        receivers.push(Node::Relay(r[stage - 1]));
                    }
                }
                if self.metric == RoutingMetric::ReceivedPower {
                    let row: Vec<Complex64> = tx.iter().map(|t| g.link(*t, rx)).collect();
                    received_power_metric(&row, snr)
                } else {
                    receivers.push(rx);
                    mimo_capacity_metric(&g.link_matrix(&tx, &receivers), snr)
                }
            }
        }
    }

    fn has_successor(&self, site: RelaySite, used: &BTreeSet<RelaySite>) -> bool {
        site.col + 1 >= self.grid.cols()
            || self
                .grid
                .relays_in_column(site.col + 1)
                .into_iter()
                .any(|n| !used.contains(&n) && self.grid.in_range(Node::Relay(site), Node::Relay(n)))
    }

    /// Establish route `j` stage by stage given the other routes in `routes`.
    fn build_route(&self, routes: &Partial, j: usize, used: &BTreeSet<RelaySite>) -> Result<Vec<RelaySite>> {
        let mut route: Vec<RelaySite> = Vec::with_capacity(self.grid.cols());
        for stage in 1..=self.grid.cols() {
            let prev = self.transmitter(j, &route, stage);
            let mut best: Option<(f64, RelaySite)> = None;
            for cand in self.grid.relays_in_column(stage - 1) {
                if used.contains(&cand) || !self.grid.in_range(prev, Node::Relay(cand)) {
                    continue;
                }
                if !self.has_successor(cand, used) {
                    continue;
                }
                let s = self.score(routes, j, &route, stage, cand);
                // strict comparison keeps the lowest-index candidate on ties
                if best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, cand));
                }
            }
            match best {
                Some((_, site)) => route.push(site),
                None => {
                    return Err(Error::Infeasible {
                        stage,
                        reason: format!("no free relay in range for route {}", j + 1),
                    })
                }
            }
        }
        Ok(route)
    }

    /// Sum throughput of a complete path.
    fn throughput(&self, routes: &[Vec<RelaySite>]) -> Result<f64> {
        let g = self.grid;
        let l = routes.len();
        if self.metric.harnesses() {
            let hops = g.stage_matrices(routes)?;
            let ladder = run_recursion_on(&hops, 1.0, &QuantizationPolicy::WynerZiv)?;
            return Ok(l as f64 * ladder.source_rate());
        }
        let partial: Partial = routes.iter().cloned().map(Some).collect();
        let snr = g.snr();
        let mut sum = 0.0;
        for (j, route) in routes.iter().enumerate() {
            let mut worst = f64::INFINITY;
            for stage in 1..=g.cols() {
                let rx = Node::Relay(route[stage - 1]);
                let signal = snr * g.link(self.transmitter(j, route, stage), rx).norm_sqr();
                let interference: f64 = self
                    .interferers(&partial, j, stage)
                    .into_iter()
                    .map(|t| snr * g.link(t, rx).norm_sqr())
                    .sum();
                worst = worst.min(log2_1p(signal / (1.0 + interference)));
            }
            sum += if worst.is_finite() { worst } else { 0.0 };
        }
        Ok(sum)
    }

    /// Build one path from scratch, then improve it route by route.
    fn establish(&self, reserved: &BTreeSet<RelaySite>, max_iters: usize, tol: f64) -> Result<(Vec<Vec<RelaySite>>, Vec<f64>, usize)> {
        let l = self.grid.sources();
        let mut routes: Partial = vec![None; l];
        let mut used = reserved.clone();
        for j in 0..l {
            let route = self.build_route(&routes, j, &used)?;
            used.extend(route.iter().copied());
            routes[j] = Some(route);
        }
        let mut current: Vec<Vec<RelaySite>> = routes.into_iter().map(|r| r.expect("route established")).collect();
        let mut value = self.throughput(&current)?;
        let mut history = vec![value];
        let mut sweeps = 0;
        while sweeps < max_iters {
            let before = value;
            for j in 0..l {
                let mut used: BTreeSet<RelaySite> = reserved.clone();
                for (m, r) in current.iter().enumerate() {
                    if m != j {
                        used.extend(r.iter().copied());
                    }
                }
                let others: Partial = current.iter().enumerate().map(|(m, r)| (m != j).then(|| r.clone())).collect();
                let Ok(route) = self.build_route(&others, j, &used) else {
                    continue;
                };
                if route == current[j] {
                    continue;
                }
                let mut trial = current.clone();
                trial[j] = route;
                let v = self.throughput(&trial)?;
                if v > value {
                    current = trial;
                    value = v;
                }
            }
            sweeps += 1;
            history.push(value);
            if value - before < tol {
                break;
            }
        }
        Ok((current, history, sweeps))
    }
}

/// Establish both paths; path 2 uses only relays left unused by path 1.
pub fn establish_paths(grid: &ClusterGrid, metric: RoutingMetric, max_iters: usize, tol: f64) -> Result<RoutingState> {
    let first = Builder {
        grid,
        metric,
        other: &[],
    };
    let (p1, h1, s1) = first.establish(&BTreeSet::new(), max_iters, tol)?;
    let reserved: BTreeSet<RelaySite> = p1.iter().flatten().copied().collect();
    let second = Builder {
        grid,
        metric,
        other: &p1,
    };
    let (p2, h2, s2) = second.establish(&reserved, max_iters, tol)?;
    Ok(RoutingState {
        paths: [p1, p2],
        metric,
        iterations: s1 + s2,
        history: [h1, h2],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RoutedScheme {
    OptimizedQmf(QuantizationPolicy),
    Mr,
}

impl RoutedScheme {
    pub fn optimized_qmf() -> Self {
        RoutedScheme::OptimizedQmf(QuantizationPolicy::WynerZiv)
    }
}

/// Interferers seen by a decode-and-forward relay receiver: `2L - 2` on
/// interior rows, `1.5 L - 2` on the top and bottom rows.
pub fn mr_interferers(grid: &ClusterGrid, site: RelaySite) -> f64 {
    let l = grid.sources() as f64;
    let boundary = site.row == 0 || site.row + 1 == grid.rows();
    let n = if boundary { 1.5 * l - 2.0 } else { 2.0 * l - 2.0 };
    n.max(0.0)
}

/// Symmetric rate of the routed network under the given scheme.
pub fn evaluate_routed_network(state: &RoutingState, grid: &ClusterGrid, scheme: &RoutedScheme) -> Result<f64> {
    match scheme {
        RoutedScheme::OptimizedQmf(policy) => {
            let mut sum = 0.0;
            for path in Path::BOTH {
                let hops = grid.stage_matrices(state.routes(path))?;
                // grid gains already carry the SNR
                sum += run_recursion_on(&hops, 1.0, policy)?.source_rate();
            }
            Ok(sum / 2.0)
        }
        RoutedScheme::Mr => {
            let snr = grid.snr();
            let mut worst = f64::INFINITY;
            for path in Path::BOTH {
                for (j, route) in state.routes(path).iter().enumerate() {
                    for (k, site) in route.iter().enumerate() {
                        let tx = if k == 0 { Node::Source(j) } else { Node::Relay(route[k - 1]) };
                        let g = grid.gain(tx, Node::Relay(*site)).norm_sqr();
                        let n = mr_interferers(grid, *site);
                        worst = worst.min(log2_1p(g / (1.0 + n * snr)));
                    }
                }
            }
            if worst.is_finite() {
                Ok(worst)
            } else {
                // no relays: sources reach the destination directly
                Ok(log2_1p(snr / (1.0 + (2.0 * grid.sources() as f64 - 2.0) * snr)))
            }
        }
    }
}
