//! JSON configuration: model term lists and run settings.
//!
//! A model file lists term names per side, optionally with a parameter
//! vector:
//!
//! ```json
//! { "within": ["within_edges_per_block"],
//!   "between": ["between_edges_per_pair"],
//!   "theta": { "within": [-1.0, -1.2], "between": [-3.0] } }
//! ```
//!
//! Term names are those printed by [`StatisticTerm::name`] (1-based
//! indices) plus the expansions `within_edges_per_block`, `nodefactor_all`,
//! `transitive_edges_per_bgroup` and `between_edges_per_pair`.

use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::BlockPartition;
use crate::mcmle::FitConfig;
use crate::model::{ModelSpec, ParamVector, StatisticTerm};
use crate::sampler::McmcConfig;

/// Deserializes JSON, reporting the key path of the first violation.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path.is_empty() { ".".to_string() } else { path }, e.into_inner().to_string())
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    parse_json(&text).map_err(|e| match e {
        Error::Config { path: key, message } => Error::config(key, format!("{message} (in {})", path.display())),
        other => other,
    })
}

/// Reads a configuration file, or the `config` member of a run manifest so
/// that a run can be repeated from its manifest alone.
pub fn read_config_or_manifest<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = parse_json(&text)?;
    let inner = match value.get("tool_version").and(value.get("config")) {
        Some(cfg) => cfg.clone(),
        None => value,
    };
    serde_path_to_error::deserialize(inner).map_err(|e| {
        let key = e.path().to_string();
        Error::config(key, format!("{} (in {})", e.into_inner(), path.display()))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaConfig {
    #[serde(default)]
    pub within: Vec<f64>,
    #[serde(default)]
    pub between: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub within: Vec<String>,
    #[serde(default)]
    pub between: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaConfig>,
}

/// A model resolved against a partition.
#[derive(Clone, Debug)]
pub struct ResolvedModel {
    pub spec: ModelSpec,
    pub theta: Option<ParamVector>,
    /// Expanded term names; serializing this and parsing again yields the
    /// same value.
    pub canonical: ModelConfig,
}

fn index(s: &str) -> Option<usize> {
    s.parse::<usize>().ok().filter(|&i| i >= 1).map(|i| i - 1)
}

fn expand(name: &str, within: bool, partition: &BlockPartition) -> Option<Vec<StatisticTerm>> {
    use StatisticTerm::*;
    let k = partition.n_blocks();
    let terms = if within {
        match name {
            "within_edges" => vec![WithinEdgesTotal],
            "within_edges_per_block" => (0..k).map(WithinEdgesPerBlock).collect(),
            "nodefactor_all" => (0..partition.n_node_groups()).map(WithinEdgesByNodeGroup).collect(),
            "transitive_edges" => vec![WithinTransitiveEdgesTotal],
            "transitive_edges_per_bgroup" => {
                (0..partition.n_block_groups()).map(WithinTransitiveEdgesByBlockGroup).collect()
            }
            _ => {
                if let Some(i) = name.strip_prefix("within_edges_block_") {
                    vec![WithinEdgesPerBlock(index(i)?)]
                } else if let Some(i) = name.strip_prefix("nodefactor_") {
                    vec![WithinEdgesByNodeGroup(index(i)?)]
                } else {
                    let i = name.strip_prefix("transitive_edges_bgroup_")?;
                    vec![WithinTransitiveEdgesByBlockGroup(index(i)?)]
                }
            }
        }
    } else {
        match name {
            "between_edges" => vec![BetweenEdgesTotal],
            "between_edges_per_pair" => {
                (0..k).flat_map(|a| (a + 1..k).map(move |b| BetweenEdgesPerPair(a, b))).collect()
            }
            _ => {
                let rest = name.strip_prefix("between_edges_pair_")?;
                let (a, b) = rest.split_once('_')?;
                vec![BetweenEdgesPerPair(index(a)?, index(b)?)]
            }
        }
    };
    Some(terms)
}

fn resolve_side(names: &[String], within: bool, partition: &BlockPartition) -> Result<Vec<StatisticTerm>> {
    let side = if within { "within" } else { "between" };
    let mut out = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let terms = expand(name, within, partition)
            .ok_or_else(|| Error::config(format!("{side}[{i}]"), format!("unknown {side} term `{name}`")))?;
        if terms.is_empty() {
            return Err(Error::config(format!("{side}[{i}]"), format!("`{name}` expands to no terms")));
        }
        out.extend(terms);
    }
    Ok(out)
}

impl ModelConfig {
    pub fn resolve(&self, partition: Arc<BlockPartition>) -> Result<ResolvedModel> {
        let within = resolve_side(&self.within, true, &partition)?;
        let between = resolve_side(&self.between, false, &partition)?;
        let spec = ModelSpec::new(within, between, partition)?;
        let theta = match &self.theta {
            None => None,
            Some(t) => {
                if t.within.len() != spec.p() {
                    return Err(Error::config(
                        "theta.within",
                        format!("expected {} values, found {}", spec.p(), t.within.len()),
                    ));
                }
                if t.between.len() != spec.q() {
                    return Err(Error::config(
                        "theta.between",
                        format!("expected {} values, found {}", spec.q(), t.between.len()),
                    ));
                }
                Some(ParamVector::new(t.within.clone(), t.between.clone())?)
            }
        };
        let names = |terms: &[StatisticTerm]| terms.iter().map(StatisticTerm::name).collect();
        let canonical = ModelConfig {
            within: names(spec.within_terms()),
            between: names(spec.between_terms()),
            theta: self.theta.clone(),
        };
        Ok(ResolvedModel { spec, theta, canonical })
    }
}

/// Settings shared by the graph-level subcommands.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mcmc: McmcConfig,
    pub fit: FitConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.mcmc.validate()?;
        self.fit.validate()
    }
}
