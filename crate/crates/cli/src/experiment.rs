//! Dispatch of a configured experiment onto the core models, with seeded
//! Monte Carlo trials on a rayon pool.

use crate::config::{db_to_linear, Experiment, ExperimentConfig, PowerConvention};
use crate::table::{Row, Table};
use backhaul_core::asymptotic::{dense_ladder, sparse_ladder, DenseParams, SparseParams};
use backhaul_core::network::{build_network, write_network, ChannelModel, LayeredNetwork, NetworkParams, Path, PowerRule};
use backhaul_core::rate_core::{mr_rate_dense, mr_rate_sparse, run_recursion, QuantizationPolicy};
use backhaul_core::receivers::{receiver_ladder, ReceiverKind};
use backhaul_core::routing::{establish_paths, evaluate_routed_network, ClusterGrid, RoutedScheme};
use backhaul_core::schedule::build_schedule;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] backhaul_core::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses one per core.
    pub jobs: Option<usize>,
    /// Keep per-trial, per-stage rates.
    pub verbose: bool,
    pub dump_network: bool,
    pub dump_schedule: bool,
}

/// Rate of one series in one trial; `stage` 0 is the source rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub snr_db: f64,
    pub sources: Option<usize>,
    pub stages: usize,
    pub scheme: String,
    pub label: String,
    pub stage: usize,
    pub rate: f64,
}

pub const TRIAL_HEADER: &str = "trial,seed,snr,L,K,scheme,policy_or_kind,stage,rate";

impl TrialRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.seed,
            crate::table::sig6(self.snr_db),
            self.sources.map_or_else(|| "inf".to_string(), |l| l.to_string()),
            self.stages,
            self.scheme,
            self.label,
            self.stage,
            crate::table::sig6(self.rate)
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub table: Table,
    pub trials: Vec<TrialRecord>,
    /// Text dumps requested by `--dump-network` / `--dump-schedule`.
    pub dumps: Vec<String>,
}

/// Seed of trial `i`, shared by every grid point of a run so that points are
/// compared on common random numbers.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy)]
struct Point {
    snr_db: f64,
    sources: Option<usize>,
    stages: usize,
}

impl Point {
    fn snr(&self) -> f64 {
        db_to_linear(self.snr_db)
    }
}

#[derive(Debug, Clone)]
struct Series {
    scheme: String,
    label: String,
}

impl Series {
    fn new(scheme: impl Into<String>, label: impl Into<String>) -> Self {
        Series {
            scheme: scheme.into(),
            label: label.into(),
        }
    }
}

/// Per-series stage rates `r_0 ..` of one trial.
type TrialRates = Vec<Vec<f64>>;

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    opts: &'a RunOptions,
    out: Outcome,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Stage-wise mean of the two paths' ladders.
fn path_mean(ladders: [Vec<f64>; 2]) -> Vec<f64> {
    ladders[0].iter().zip(&ladders[1]).map(|(a, b)| (a + b) / 2.0).collect()
}

fn qmf_rates(net: &LayeredNetwork, policy: &QuantizationPolicy) -> backhaul_core::Result<Vec<f64>> {
    let a = run_recursion(net, Path::First, policy)?.rates().to_vec();
    let b = run_recursion(net, Path::Second, policy)?.rates().to_vec();
    Ok(path_mean([a, b]))
}

fn receiver_rates(net: &LayeredNetwork, kind: ReceiverKind) -> backhaul_core::Result<Vec<f64>> {
    let a = receiver_ladder(net, Path::First, kind)?.ladder.rates().to_vec();
    let b = receiver_ladder(net, Path::Second, kind)?.ladder.rates().to_vec();
    Ok(path_mean([a, b]))
}

impl<'a> Runner<'a> {
    fn points(&self) -> Vec<Point> {
        let sources: Vec<Option<usize>> = if self.cfg.sources.is_empty() {
            vec![None]
        } else {
            self.cfg.sources.iter().map(|&l| Some(l)).collect()
        };
        let mut points = Vec::new();
        for &snr_db in &self.cfg.snr_db {
            for &l in &sources {
                for &k in &self.cfg.stages {
                    points.push(Point {
                        snr_db,
                        sources: l,
                        stages: k,
                    });
                }
            }
        }
        points
    }

    /// Run `trials` seeded evaluations of `eval` at `point` and append one row per series.
    fn monte_carlo<F>(&mut self, point: Point, series: &[Series], trials: usize, eval: F) -> Result<(), RunError>
    where
        F: Fn(usize, u64) -> backhaul_core::Result<TrialRates> + Sync,
    {
        let base = self.cfg.seed;
        let results: Vec<TrialRates> = (0..trials)
            .into_par_iter()
            .map(|i| eval(i, trial_seed(base, i)))
            .collect::<backhaul_core::Result<_>>()?;
        for (s, series_entry) in series.iter().enumerate() {
            let firsts: Vec<f64> = results.iter().map(|r| r[s][0]).collect();
            let (mean, stderr) = mean_and_stderr(&firsts);
            self.out.table.rows.push(Row {
                experiment: self.cfg.experiment,
                snr_db: point.snr_db,
                sources: point.sources,
                stages: point.stages,
                scheme: series_entry.scheme.clone(),
                label: series_entry.label.clone(),
                mean,
                stderr,
                trials,
                seed: base,
            });
            if self.opts.verbose {
                for (i, r) in results.iter().enumerate() {
                    for (stage, &rate) in r[s].iter().enumerate() {
                        self.out.trials.push(TrialRecord {
                            trial: i,
                            seed: trial_seed(base, i),
                            snr_db: point.snr_db,
                            sources: point.sources,
                            stages: point.stages,
                            scheme: series_entry.scheme.clone(),
                            label: series_entry.label.clone(),
                            stage,
                            rate,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn dump_network(&mut self, point: Point, net: &LayeredNetwork) {
        if self.opts.dump_network {
            self.out.dumps.push(format!(
                "# network snr_db={} L={} K={} seed={}\n{}",
                point.snr_db,
                net.sources(),
                point.stages,
                net.seed(),
                write_network(net)
            ));
        }
    }

    fn dump_schedules(&mut self) -> Result<(), RunError> {
        if !self.opts.dump_schedule {
            return Ok(());
        }
        let pairs: BTreeSet<(usize, usize)> = self
            .points()
            .into_iter()
            .filter_map(|p| p.sources.map(|l| (l, p.stages)))
            .collect();
        if pairs.is_empty() {
            log::warn!("no finite L in this run; no schedule to dump");
        }
        for (l, k) in pairs {
            let log = build_schedule(l, k, 2 * k + 4)?;
            self.out.dumps.push(format!("# schedule L={l} K={k}\n{}", log.dump()));
        }
        Ok(())
    }

    fn qmf_series(&self) -> Vec<Series> {
        self.cfg.policies.iter().map(|p| Series::new("qmf", p.name())).collect()
    }

    fn sparse(&mut self) -> Result<(), RunError> {
        let interference = self.cfg.interference.expect("validated sparse config");
        if self.cfg.trials > 1 {
            log::info!("sparse networks are deterministic; running one trial per point");
        }
        for point in self.points() {
            let snr = point.snr();
            let alpha = interference.alpha(snr);
            let mut series = self.qmf_series();
            let mut rates: TrialRates = Vec::new();
            match point.sources {
                None => {
                    for policy in &self.cfg.policies {
                        let ladder = sparse_ladder(&SparseParams {
                            snr,
                            gamma: alpha,
                            stages: point.stages,
                            policy: policy.clone(),
                        })?;
                        rates.push(ladder.rates().to_vec());
                    }
                    if self.opts.dump_network {
                        log::warn!("large-L sparse model has no network to dump");
                    }
                }
                Some(l) => {
                    let params = NetworkParams::new(l, point.stages, snr, ChannelModel::SparseWyner { alpha });
                    let net = build_network(&params, self.cfg.seed)?;
                    for policy in &self.cfg.policies {
                        rates.push(qmf_rates(&net, policy)?);
                    }
                    self.dump_network(point, &net);
                }
            }
            if self.cfg.include_mr {
                series.push(Series::new("mr", "-"));
                rates.push(vec![mr_rate_sparse(snr, alpha)]);
            }
            self.monte_carlo(point, &series, 1, |_, _| Ok(rates.clone()))?;
        }
        Ok(())
    }

    fn dense_params(&self, point: Point, l: usize) -> NetworkParams {
        let params = NetworkParams::new(l, point.stages, point.snr(), ChannelModel::DenseIid);
        match self.cfg.power {
            PowerConvention::Total => params,
            PowerConvention::PerNode => params.with_power_rule(PowerRule::PerNode).allow_power_mismatch(),
        }
    }

    fn dense(&mut self) -> Result<(), RunError> {
        for point in self.points() {
            let mut series = self.qmf_series();
            match point.sources {
                None => {
                    if self.cfg.power == PowerConvention::PerNode {
                        log::warn!("large-L dense model reads snr as the total received SNR");
                    }
                    let mut rates: TrialRates = Vec::new();
                    for policy in &self.cfg.policies {
                        let ladder = dense_ladder(&DenseParams {
                            snr: point.snr(),
                            stages: point.stages,
                            policy: policy.clone(),
                        })?;
                        rates.push(ladder.rates().to_vec());
                    }
                    self.monte_carlo(point, &series, 1, |_, _| Ok(rates.clone()))?;
                }
                Some(l) => {
                    let params = self.dense_params(point, l);
                    if self.opts.dump_network {
                        let net = build_network(&params, trial_seed(self.cfg.seed, 0))?;
                        self.dump_network(point, &net);
                    }
                    let include_mr = self.cfg.include_mr;
                    if include_mr {
                        series.push(Series::new("mr", "-"));
                    }
                    let policies = self.cfg.policies.clone();
                    self.monte_carlo(point, &series, self.cfg.trials, |_, seed| {
                        let net = build_network(&params, seed)?;
                        let mut rates: TrialRates = policies.iter().map(|p| qmf_rates(&net, p)).collect::<backhaul_core::Result<_>>()?;
                        if include_mr {
                            rates.push(vec![mr_rate_dense(net.tx_power(), l)]);
                        }
                        Ok(rates)
                    })?;
                }
            }
        }
        Ok(())
    }

    fn receivers(&mut self) -> Result<(), RunError> {
        for point in self.points() {
            let l = point.sources.expect("validated receivers config");
            let params = self.dense_params(point, l);
            if self.opts.dump_network {
                let net = build_network(&params, trial_seed(self.cfg.seed, 0))?;
                self.dump_network(point, &net);
            }
            let kinds = self.cfg.receivers.clone();
            let policies = self.cfg.policies.clone();
            let include_mr = self.cfg.include_mr;
            let mut series: Vec<Series> = kinds.iter().map(|k| Series::new("receiver", k.name())).collect();
            series.extend(self.qmf_series());
            if include_mr {
                series.push(Series::new("mr", "-"));
            }
            self.monte_carlo(point, &series, self.cfg.trials, |_, seed| {
                let net = build_network(&params, seed)?;
                let mut rates = Vec::new();
                for kind in &kinds {
                    rates.push(receiver_rates(&net, *kind)?);
                }
                for policy in &policies {
                    rates.push(qmf_rates(&net, policy)?);
                }
                if include_mr {
                    rates.push(vec![mr_rate_dense(net.tx_power(), l)]);
                }
                Ok(rates)
            })?;
        }
        Ok(())
    }

    fn routing(&mut self) -> Result<(), RunError> {
        let cfg = self.cfg;
        for point in self.points() {
            let l = point.sources.expect("validated routing config");
            let n_c = cfg.relays_per_cluster.unwrap_or(l);
            let snr = point.snr();
            let mut series = Vec::new();
            for metric in &cfg.metrics {
                for policy in &cfg.policies {
                    series.push(Series::new(format!("qmf:{metric}"), policy.name()));
                }
                if cfg.include_mr {
                    series.push(Series::new(format!("mr:{metric}"), "-"));
                }
            }
            if self.opts.dump_network {
                let seed = trial_seed(cfg.seed, 0);
                let grid = ClusterGrid::standard(point.stages, n_c, l, snr, seed)?;
                for metric in &cfg.metrics {
                    let state = establish_paths(&grid, *metric, cfg.max_iters, cfg.tol)?;
                    self.out.dumps.push(format!(
                        "# routes snr_db={} L={l} K={} n_c={n_c} seed={seed} metric={metric}\n{}{}",
                        point.snr_db,
                        point.stages,
                        state.dump(),
                        state.render(&grid)
                    ));
                }
            }
            self.monte_carlo(point, &series, cfg.trials, |_, seed| {
                let grid = ClusterGrid::standard(point.stages, n_c, l, snr, seed)?;
                let mut rates = Vec::new();
                for metric in &cfg.metrics {
                    let state = establish_paths(&grid, *metric, cfg.max_iters, cfg.tol)?;
                    for policy in &cfg.policies {
                        let scheme = RoutedScheme::OptimizedQmf(policy.clone());
                        rates.push(vec![evaluate_routed_network(&state, &grid, &scheme)?]);
                    }
                    if cfg.include_mr {
                        rates.push(vec![evaluate_routed_network(&state, &grid, &RoutedScheme::Mr)?]);
                    }
                }
                Ok(rates)
            })?;
        }
        Ok(())
    }
}

/// Run every grid point of `cfg`. Output is identical for a fixed config and
/// seed whatever the number of workers.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    pool.install(|| {
        let mut runner = Runner {
            cfg,
            opts,
            out: Outcome::default(),
        };
        runner.dump_schedules()?;
        match cfg.experiment {
            Experiment::SparseVsK => runner.sparse()?,
            Experiment::DenseVsK => runner.dense()?,
            Experiment::ReceiversVsK => runner.receivers()?,
            Experiment::RoutingVsSnr | Experiment::RoutingVsL => runner.routing()?,
        }
        Ok(runner.out)
    })
}
