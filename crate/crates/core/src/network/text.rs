//! Line-oriented text form of a network.
//!
//! ```text
//! L K model seed
//! re:im,re:im,...      one line per (path, hop, row), paths then hops then rows
//! ```
//!
//! Model tokens are `sparse_wyner:<alpha>`, `dense_iid` and
//! `cluster_grid:<n_c>:<phase_seed>`. Numbers use the shortest decimal that
//! round-trips, so parsing a dump reproduces the matrices bit for bit.

use super::{ChannelModel, LayeredNetwork, NetworkParams, Path};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use num_complex::Complex64;
use std::fmt::Write;

/// A parsed dump; the SNR and power rule are not part of the format.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDump {
    pub sources: usize,
    pub stages: usize,
    pub model: ChannelModel,
    pub seed: u64,
    pub matrices: [Vec<CMatrix>; 2],
}

impl NetworkDump {
    pub fn into_network(self, snr: f64) -> Result<LayeredNetwork> {
        let params = NetworkParams::new(self.sources, self.stages, snr, self.model);
        LayeredNetwork::from_stages(params, self.matrices, self.seed)
    }
}

fn model_token(model: &ChannelModel) -> String {
    match model {
        ChannelModel::SparseWyner { alpha } => format!("sparse_wyner:{alpha}"),
        ChannelModel::DenseIid => "dense_iid".to_string(),
        ChannelModel::ClusterGrid {
            relays_per_cluster,
            phase_seed,
        } => format!("cluster_grid:{relays_per_cluster}:{phase_seed}"),
    }
}

fn parse_model(token: &str, line: usize) -> Result<ChannelModel> {
    let bad = |reason: String| Error::Parse { line, reason };
    let mut parts = token.split(':');
    match parts.next() {
        Some("sparse_wyner") => {
            let alpha = parts
                .next()
                .and_then(|a| a.parse::<f64>().ok())
                .ok_or_else(|| bad(format!("bad sparse_wyner token `{token}`")))?;
            Ok(ChannelModel::SparseWyner { alpha })
        }
        Some("dense_iid") => Ok(ChannelModel::DenseIid),
        Some("cluster_grid") => {
            let n_c = parts.next().and_then(|a| a.parse::<usize>().ok());
            let phase_seed = parts.next().and_then(|a| a.parse::<u64>().ok());
            match (n_c, phase_seed) {
                (Some(relays_per_cluster), Some(phase_seed)) => Ok(ChannelModel::ClusterGrid {
                    relays_per_cluster,
                    phase_seed,
                }),
                _ => Err(bad(format!("bad cluster_grid token `{token}`"))),
            }
        }
        _ => Err(bad(format!("unknown model `{token}`"))),
    }
}

pub fn write_network(net: &LayeredNetwork) -> String {
    let mut out = String::new();
    let p = net.params();
    let _ = writeln!(out, "{} {} {} {}", p.sources, p.stages, model_token(&p.model), net.seed());
    for path in Path::BOTH {
        for m in net.path_matrices(path) {
            for row in m.entries().row_iter() {
                let cells: Vec<String> = row.iter().map(|z| format!("{}:{}", z.re, z.im)).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
    }
    out
}

pub fn parse_network(text: &str) -> Result<NetworkDump> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        reason: "empty input".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(Error::Parse {
            line: 1,
            reason: format!("header needs `L K model seed`, got `{header}`"),
        });
    }
    let num = |s: &str, what: &str| {
        s.parse::<u64>().map_err(|_| Error::Parse {
            line: 1,
            reason: format!("bad {what} `{s}`"),
        })
    };
    let sources = num(fields[0], "L")? as usize;
    let stages = num(fields[1], "K")? as usize;
    let model = parse_model(fields[2], 1)?;
    let seed = num(fields[3], "seed")?;

    let mut matrices: [Vec<CMatrix>; 2] = [Vec::new(), Vec::new()];
    for path in Path::BOTH {
        for _ in 0..=stages {
            let mut values = Vec::with_capacity(sources * sources);
            for _ in 0..sources {
                let (i, line) = lines.next().ok_or(Error::Parse {
                    line: text.lines().count() + 1,
                    reason: "unexpected end of input".into(),
                })?;
                let row = parse_row(line, i + 1)?;
                if row.len() != sources {
                    return Err(Error::Parse {
                        line: i + 1,
                        reason: format!("expected {sources} entries, got {}", row.len()),
                    });
                }
                values.extend(row);
            }
            matrices[path.index()].push(CMatrix::from_row_slice(sources, sources, &values));
        }
    }
    if let Some((i, _)) = lines.next() {
        return Err(Error::Parse {
            line: i + 1,
            reason: "trailing data".into(),
        });
    }
    Ok(NetworkDump {
        sources,
        stages,
        model,
        seed,
        matrices,
    })
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<Complex64>> {
    line.trim()
        .split(',')
        .map(|cell| {
            let (re, im) = cell.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                reason: format!("entry `{cell}` is not `re:im`"),
            })?;
            match (re.trim().parse::<f64>(), im.trim().parse::<f64>()) {
                (Ok(re), Ok(im)) => Ok(Complex64::new(re, im)),
                _ => Err(Error::Parse {
                    line: lineno,
                    reason: format!("entry `{cell}` is not numeric"),
                }),
            }
        })
        .collect()
}
