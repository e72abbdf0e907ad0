//! Experiment configuration, read from TOML.
//!
//! ```toml
//! experiment = "sparse_vs_k"
//! snr_db = [20.0]
//! inr_db = 15.0
//! stages = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
//! policies = ["optimal", "stage_depth", "noise_level", "wyner_ziv"]
//! trials = 1
//! seed = 1
//! ```

use backhaul_core::rate_core::QuantizationPolicy;
use backhaul_core::receivers::{ReceiverKind, DEFAULT_MAX_INT};
use backhaul_core::routing::RoutingMetric;
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("config field `{field}`: {reason}")]
    Field { field: &'static str, reason: String },
}

fn field(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    SparseVsK,
    DenseVsK,
    ReceiversVsK,
    RoutingVsSnr,
    RoutingVsL,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::SparseVsK => "sparse_vs_k",
            Experiment::DenseVsK => "dense_vs_k",
            Experiment::ReceiversVsK => "receivers_vs_k",
            Experiment::RoutingVsSnr => "routing_vs_snr",
            Experiment::RoutingVsL => "routing_vs_l",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            Experiment::SparseVsK,
            Experiment::DenseVsK,
            Experiment::ReceiversVsK,
            Experiment::RoutingVsSnr,
            Experiment::RoutingVsL,
        ]
        .into_iter()
        .find(|e| e.name() == name)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How a dense network's `snr` maps to per-node power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerConvention {
    /// `snr` is the total received SNR; each node transmits `snr / L`.
    #[default]
    Total,
    /// Each node transmits at `snr`.
    PerNode,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Experiment,
    snr_db: Vec<f64>,
    stages: Vec<usize>,
    #[serde(default)]
    sources: Vec<usize>,
    #[serde(default)]
    policies: Vec<String>,
    #[serde(default)]
    receivers: Vec<String>,
    #[serde(default)]
    metrics: Vec<String>,
    inr_db: Option<f64>,
    alpha: Option<f64>,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default)]
    seed: u64,
    output: Option<PathBuf>,
    #[serde(default)]
    power: PowerConvention,
    relays_per_cluster: Option<usize>,
    #[serde(default = "default_true")]
    include_mr: bool,
    if_max_int: Option<u32>,
    #[serde(default = "default_max_iters")]
    max_iters: usize,
    #[serde(default = "default_tol")]
    tol: f64,
}

fn default_trials() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_max_iters() -> usize {
    10
}

fn default_tol() -> f64 {
    1e-6
}

/// Interference level of the sparse model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interference {
    /// Fixed Wyner coefficient.
    Alpha(f64),
    /// INR in dB; `alpha = sqrt(INR / SNR)` at each SNR point.
    InrDb(f64),
}

impl Interference {
    pub fn alpha(&self, snr: f64) -> f64 {
        match *self {
            Interference::Alpha(a) => a,
            Interference::InrDb(db) => (db_to_linear(db) / snr).sqrt(),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub snr_db: Vec<f64>,
    pub stages: Vec<usize>,
    /// Empty for the large-`L` models.
    pub sources: Vec<usize>,
    pub policies: Vec<QuantizationPolicy>,
    pub receivers: Vec<ReceiverKind>,
    pub metrics: Vec<RoutingMetric>,
    pub interference: Option<Interference>,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub power: PowerConvention,
    /// `None` uses `n_c = L` at each grid point.
    pub relays_per_cluster: Option<usize>,
    pub include_mr: bool,
    pub max_iters: usize,
    pub tol: f64,
}

pub fn parse_policy(name: &str) -> Option<QuantizationPolicy> {
    match name {
        "noise_level" => Some(QuantizationPolicy::NoiseLevel),
        "stage_depth" => Some(QuantizationPolicy::StageDepth),
        "wyner_ziv" => Some(QuantizationPolicy::WynerZiv),
        "optimal" => Some(QuantizationPolicy::Optimal),
        _ => None,
    }
}

pub fn parse_receiver(name: &str, max_int: u32) -> Option<ReceiverKind> {
    match name {
        "zf" => Some(ReceiverKind::Zf),
        "mmse" => Some(ReceiverKind::Mmse),
        "if" => Some(ReceiverKind::IntegerForcing { max_int }),
        "ml" => Some(ReceiverKind::MlQuantized),
        _ => None,
    }
}

pub fn parse_metric(name: &str) -> Option<RoutingMetric> {
    match name {
        "mimo_capacity" => Some(RoutingMetric::MimoCapacity),
        "received_power" => Some(RoutingMetric::ReceivedPower),
        "interference_aware" => Some(RoutingMetric::InterferenceAware),
        _ => None,
    }
}

fn parse_list<T>(
    names: &[String],
    name: &'static str,
    default: Vec<T>,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<Vec<T>, ConfigError> {
    if names.is_empty() {
        return Ok(default);
    }
    names
        .iter()
        .map(|n| parse(n).ok_or_else(|| field(name, format!("unknown entry `{n}`"))))
        .collect()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax {
            path: PathBuf::from("<config>"),
            message: e.message().to_string(),
        })?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Syntax { message, .. } => ConfigError::Syntax {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let all_policies = vec![
            QuantizationPolicy::Optimal,
            QuantizationPolicy::StageDepth,
            QuantizationPolicy::NoiseLevel,
            QuantizationPolicy::WynerZiv,
        ];
        let max_int = raw.if_max_int.unwrap_or(DEFAULT_MAX_INT);
        let policies = match raw.experiment {
            Experiment::RoutingVsSnr | Experiment::RoutingVsL => {
                parse_list(&raw.policies, "policies", vec![QuantizationPolicy::Optimal], parse_policy)?
            }
            Experiment::ReceiversVsK => parse_list(&raw.policies, "policies", Vec::new(), parse_policy)?,
            _ => parse_list(&raw.policies, "policies", all_policies, parse_policy)?,
        };
        let receivers = parse_list(
            &raw.receivers,
            "receivers",
            vec![
                ReceiverKind::MlQuantized,
                ReceiverKind::IntegerForcing { max_int },
                ReceiverKind::Mmse,
                ReceiverKind::Zf,
            ],
            |n| parse_receiver(n, max_int),
        )?;
        let metrics = parse_list(
            &raw.metrics,
            "metrics",
            vec![RoutingMetric::MimoCapacity],
            parse_metric,
        )?;
        let interference = match (raw.alpha, raw.inr_db) {
            (Some(_), Some(_)) => return Err(field("alpha", "give either `alpha` or `inr_db`, not both")),
            (Some(a), None) => Some(Interference::Alpha(a)),
            (None, Some(db)) => Some(Interference::InrDb(db)),
            (None, None) => None,
        };
        let cfg = ExperimentConfig {
            experiment: raw.experiment,
            snr_db: raw.snr_db,
            stages: raw.stages,
            sources: raw.sources,
            policies,
            receivers: if raw.experiment == Experiment::ReceiversVsK { receivers } else { Vec::new() },
            metrics,
            interference,
            trials: raw.trials,
            seed: raw.seed,
            output: raw.output,
            power: raw.power,
            relays_per_cluster: raw.relays_per_cluster,
            include_mr: raw.include_mr,
            max_iters: raw.max_iters,
            tol: raw.tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.snr_db.is_empty() {
            return Err(field("snr_db", "must list at least one value"));
        }
        if let Some(bad) = self.snr_db.iter().find(|v| !v.is_finite()) {
            return Err(field("snr_db", format!("{bad} is not finite")));
        }
        if self.stages.is_empty() {
            return Err(field("stages", "must list at least one value"));
        }
        if self.trials == 0 {
            return Err(field("trials", "must be at least 1"));
        }
        if self.sources.contains(&0) {
            return Err(field("sources", "L must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(field("tol", "must be non-negative"));
        }
        match self.experiment {
            Experiment::SparseVsK => match self.interference {
                None => return Err(field("inr_db", "sparse experiments need `inr_db` or `alpha`")),
                Some(Interference::Alpha(a)) if !(a >= 0.0 && a.is_finite()) => {
                    return Err(field("alpha", format!("must be non-negative, got {a}")))
                }
                Some(Interference::InrDb(db)) if !db.is_finite() => return Err(field("inr_db", "must be finite")),
                _ => {}
            },
            Experiment::ReceiversVsK | Experiment::RoutingVsSnr | Experiment::RoutingVsL => {
                if self.sources.is_empty() {
                    return Err(field("sources", "this experiment needs at least one finite L"));
                }
            }
            Experiment::DenseVsK => {}
        }
        if matches!(self.experiment, Experiment::RoutingVsSnr | Experiment::RoutingVsL) {
            if self.stages.contains(&0) {
                return Err(field("stages", "routing needs K >= 1"));
            }
            if let Some(n_c) = self.relays_per_cluster {
                if let Some(l) = self.sources.iter().find(|&&l| l > n_c) {
                    return Err(field("relays_per_cluster", format!("n_c = {n_c} is below L = {l}")));
                }
            }
            if self.policies.is_empty() && !self.include_mr {
                return Err(field("policies", "nothing to evaluate"));
            }
        }
        if self.experiment == Experiment::ReceiversVsK && self.receivers.is_empty() {
            return Err(field("receivers", "must list at least one receiver"));
        }
        Ok(())
    }
}
