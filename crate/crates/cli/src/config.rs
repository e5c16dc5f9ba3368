//! Experiment configuration shared by the subcommands.

use std::path::Path;

use clap::Args;
use matchsync::estimation::Sampler;
use matchsync::graph::random_connected_er;
use matchsync::{ArrivalModel, CompatibilityGraph, Error, HorizonConfig, PatienceLaw, Policy};
use serde::Serialize;

/// Graph and arrival-model flags.
#[derive(Args, Clone, Debug)]
pub struct ModelArgs {
    /// Graph: `paw`, `path:<n>`, `complete:<n>`, `er:<n>:<q>:<seed>` or a
    /// JSON file `{"n": .., "edges": [[i, j], ..]}`.
    #[arg(long, default_value = "paw")]
    pub graph: String,

    /// Deterministic patience `p + ε` (shorthand for `--patience deterministic:<p>`).
    #[arg(long)]
    pub p: Option<u32>,

    /// Patience law: `deterministic:<p>` or `discrete:<v>@<prob>,...`.
    #[arg(long)]
    pub patience: Option<String>,

    /// Latency probability.
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,

    /// Class probabilities, comma separated (uniform when omitted).
    #[arg(long, value_delimiter = ',')]
    pub mu: Option<Vec<f64>>,

    /// Arrival model JSON file `{"mu": [..], "patience": .., "gamma": ..}`;
    /// replaces `--p`, `--patience`, `--gamma` and `--mu`.
    #[arg(long)]
    pub model: Option<String>,
}

/// Resolved graph and model, embedded in every output.
#[derive(Clone, Debug, Serialize)]
pub struct ResolvedModel {
    pub graph_spec: String,
    pub graph: CompatibilityGraph,
    pub model: ArrivalModel,
}

pub fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub fn parse_graph(spec: &str) -> Result<CompatibilityGraph, Error> {
    if let Some(rest) = spec.strip_prefix("er:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let bad = || config_error(format!("graph `{spec}`: expected er:<n>:<q>:<seed>"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let n = parts[0].parse().map_err(|_| bad())?;
        let q = parts[1].parse().map_err(|_| bad())?;
        let seed = parts[2].parse().map_err(|_| bad())?;
        return random_connected_er(n, q, seed);
    }
    if let Ok(g) = spec.parse::<CompatibilityGraph>() {
        return Ok(g);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(config_error(format!("graph `{spec}` is neither a known name nor a file")));
    }
    let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("reading {spec}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("graph file {spec}: {e}")))
}

pub fn parse_patience(spec: &str) -> Result<PatienceLaw, Error> {
    let bad = || config_error(format!("patience `{spec}`: expected deterministic:<p> or discrete:<v>@<prob>,..."));
    match spec.split_once(':') {
        Some(("deterministic", p)) => Ok(PatienceLaw::Deterministic(p.trim().parse().map_err(|_| bad())?)),
        Some(("discrete", items)) => {
            let mut support = Vec::new();
            for item in items.split(',') {
                let (v, w) = item.split_once('@').ok_or_else(bad)?;
                support.push((v.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?));
            }
            Ok(PatienceLaw::Discrete(support))
        }
        _ => Err(bad()),
    }
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<ResolvedModel, Error> {
        let graph = parse_graph(&self.graph)?;
        let model = if let Some(path) = &self.model {
            let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("reading {path}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| config_error(format!("model file {path}: {e}")))?
        } else {
            let patience = match (&self.patience, self.p) {
                (Some(s), p) => {
                    let law = parse_patience(s)?;
                    if let (Some(p), PatienceLaw::Deterministic(q)) = (p, &law) {
                        if p != *q {
                            return Err(config_error(format!("--p {p} conflicts with --patience {s}")));
                        }
                    }
                    law
                }
                (None, Some(p)) => PatienceLaw::Deterministic(p),
                (None, None) => return Err(config_error("give --p or --patience")),
            };
            let mu = self.mu.clone().unwrap_or_else(|| vec![1.0 / graph.n() as f64; graph.n()]);
            ArrivalModel {
                mu,
                patience,
                gamma: self.gamma,
            }
        };
        model.validate()?;
        if model.n() != graph.n() {
            return Err(config_error(format!("mu has {} classes, graph has {}", model.n(), graph.n())));
        }
        Ok(ResolvedModel {
            graph_spec: self.graph.clone(),
            graph,
            model,
        })
    }
}

/// Sampling flags.
#[derive(Args, Clone, Debug)]
pub struct RunArgs {
    /// Matching policy: fcfm, ml, random, priority:<c1>,<c2>,...
    #[arg(long, default_value = "fcfm")]
    pub policy: String,

    /// Sampler: algo3 (synchronizing words), algo2 (domination), cftp.
    #[arg(long, default_value = "algo3")]
    pub algo: String,

    #[arg(long, default_value_t = 1)]
    pub reps: u64,

    /// Master seed; replication seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// First backward horizon (default 2p, or 2⌈m⌉ for general patience).
    #[arg(long)]
    pub initial_horizon: Option<u64>,

    /// Largest backward horizon before giving up (exit 3).
    #[arg(long, default_value_t = matchsync::engine::DEFAULT_HORIZON_CAP)]
    pub horizon_cap: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedRun {
    pub policy: Policy,
    pub algorithm: Sampler,
    pub reps: u64,
    pub seed: u64,
    pub horizon: HorizonConfig,
}

impl RunArgs {
    pub fn resolve(&self, m: &ResolvedModel) -> Result<ResolvedRun, Error> {
        let policy: Policy = self.policy.parse().map_err(|e: Error| config_error(e.to_string()))?;
        if let Policy::Priority(order) = &policy {
            if order.iter().any(|&c| c == 0 || c as usize > m.graph.n()) {
                return Err(config_error(format!("priority list {order:?} names a class outside 1..={}", m.graph.n())));
            }
        }
        let algorithm = self.algo.parse().map_err(|e: Error| config_error(e.to_string()))?;
        if self.reps == 0 {
            return Err(config_error("--reps must be at least 1"));
        }
        let mut horizon = matchsync::estimation::default_horizon(&m.model).with_cap(self.horizon_cap);
        if let Some(h) = self.initial_horizon {
            if h == 0 {
                return Err(config_error("--initial-horizon must be positive"));
            }
            horizon.initial = h;
        }
        if algorithm == Sampler::Dominated {
            matchsync::dominated::DominatedSpec::from_model(&m.model)?;
        }
        if algorithm != Sampler::Dominated && m.model.deterministic_patience().is_none() {
            return Err(config_error(format!("{algorithm} needs deterministic patience; use algo2")));
        }
        Ok(ResolvedRun {
            policy,
            algorithm,
            reps: self.reps,
            seed: self.seed,
            horizon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_specs() {
        assert_eq!(parse_patience("deterministic:3").unwrap(), PatienceLaw::Deterministic(3));
        assert_eq!(
            parse_patience("discrete:0.5@0.4,2.5@0.6").unwrap(),
            PatienceLaw::Discrete(vec![(0.5, 0.4), (2.5, 0.6)])
        );
        assert!(parse_patience("uniform:3").is_err());
        assert!(parse_patience("discrete:0.5").is_err());
    }

    #[test]
    fn graph_specs() {
        assert_eq!(parse_graph("paw").unwrap(), CompatibilityGraph::paw());
        assert_eq!(parse_graph("complete:3").unwrap().edges().len(), 3);
        assert_eq!(parse_graph("er:5:0.6:7").unwrap(), random_connected_er(5, 0.6, 7).unwrap());
        assert!(matches!(parse_graph("nope"), Err(Error::Config(_))));
        assert!(parse_graph("er:5:x:1").is_err());
    }
}
