//! Edge-toggle Metropolis sampling of block-based subgraphs.
//!
//! Each subgraph is sampled by its own chain: propose flipping one edge
//! variable chosen uniformly, accept with probability
//! `min(1, exp<theta, delta s>)`. Chains for distinct subgraphs draw from
//! independent streams derived from `(seed, replication, subgraph index)`,
//! so whole-graph draws do not depend on how chains are scheduled.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LocalGraph, SubgraphRef, SubgraphState};
use crate::linalg::Matrix;
use crate::model::{ModelSpec, ParamVector, SubgraphTerms};
use crate::{par, rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    /// Burn-in length in units of the subgraph's edge-variable count.
    pub burnin_multiplier: f64,
    /// Spacing between retained draws, same units.
    pub interval_multiplier: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { burnin_multiplier: 10.0, interval_multiplier: 1.0, n_samples: 1000, seed: 0 }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.burnin_multiplier > 0.0) || !(self.interval_multiplier > 0.0) {
            return Err(Error::config("mcmc", "burn-in and interval multipliers must be positive"));
        }
        if self.n_samples == 0 {
            return Err(Error::config("mcmc.n_samples", "at least one sample is required"));
        }
        Ok(())
    }

    pub fn burnin_toggles(&self, n_vars: usize) -> u64 {
        (self.burnin_multiplier * n_vars as f64).ceil() as u64
    }

    pub fn interval_toggles(&self, n_vars: usize) -> u64 {
        ((self.interval_multiplier * n_vars as f64).ceil() as u64).max(1)
    }
}

/// Rows of statistic vectors, stored flat.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StatSample {
    dim: usize,
    data: Vec<i64>,
}

impl StatSample {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<i64>]) -> Self {
        let mut s = Self::new(dim);
        for r in rows {
            s.push(r);
        }
        s
    }

    pub fn push(&mut self, row: &[i64]) {
        debug_assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i64]> {
        self.data.chunks(self.dim.max(1))
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut m = vec![0.0; self.dim];
        for row in self.rows() {
            for (a, &v) in m.iter_mut().zip(row) {
                *a += v as f64;
            }
        }
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Sample covariance with divisor `n`.
    pub fn covariance(&self) -> Matrix {
        let mean = self.mean();
        let n = self.len() as f64;
        let d = self.dim;
        let mut c = Matrix::zeros(d, d);
        for row in self.rows() {
            for a in 0..d {
                let da = row[a] as f64 - mean[a];
                for b in a..d {
                    c[(a, b)] += da * (row[b] as f64 - mean[b]);
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                c[(a, b)] /= n;
                c[(b, a)] = c[(a, b)];
            }
        }
        c
    }
}

/// Metropolis chain over one subgraph.
#[derive(Clone, Debug)]
pub struct SubgraphChain {
    terms: SubgraphTerms,
    theta: Vec<f64>,
    state: SubgraphState,
    stats: Vec<i64>,
    delta: Vec<i64>,
    proposed: u64,
    accepted: u64,
}

impl SubgraphChain {
    /// `theta` is the parameter slice of the subgraph's side (within or
    /// between).
    pub fn new(terms: SubgraphTerms, theta: &[f64], state: SubgraphState) -> Result<Self> {
        if theta.len() != terms.dim() {
            return Err(Error::Dimension(format!("chain needs {} parameters, got {}", terms.dim(), theta.len())));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        if state.dim() != terms.n_vars() {
            return Err(Error::Dimension("initial state does not match the subgraph".into()));
        }
        let stats = terms.slice(&state);
        Ok(Self { delta: vec![0; terms.dim()], terms, theta: theta.to_vec(), state, stats, proposed: 0, accepted: 0 })
    }

    #[inline]
    pub fn step(&mut self, rng: &mut ChaCha8Rng) -> bool {
        self.delta.iter_mut().for_each(|d| *d = 0);
        let accepted = match &mut self.state {
            SubgraphState::Within(w) => {
                let a = w.size();
                if a < 2 {
                    return false;
                }
                let r = rng.random_range(0..a);
                let mut s = rng.random_range(0..a - 1);
                if s >= r {
                    s += 1;
                }
                self.terms.within_delta(w, r, s, &mut self.delta);
                let ok = accept(&self.theta, &self.delta, rng);
                if ok {
                    w.toggle(r, s);
                }
                ok
            }
            SubgraphState::Between(b) => {
                if b.dim() == 0 {
                    return false;
                }
                let r = rng.random_range(0..b.rows());
                let c = rng.random_range(0..b.cols());
                self.terms.between_delta(b, r, c, &mut self.delta);
                let ok = accept(&self.theta, &self.delta, rng);
                if ok {
                    b.toggle(r, c);
                }
                ok
            }
        };
        self.proposed += 1;
        if accepted {
            self.accepted += 1;
            for (s, d) in self.stats.iter_mut().zip(&self.delta) {
                *s += d;
            }
        }
        accepted
    }

    pub fn run(&mut self, toggles: u64, rng: &mut ChaCha8Rng) {
        for _ in 0..toggles {
            self.step(rng);
        }
    }

    pub fn stats(&self) -> &[i64] {
        &self.stats
    }

    pub fn state(&self) -> &SubgraphState {
        &self.state
    }

    pub fn into_state(self) -> SubgraphState {
        self.state
    }

    pub fn n_vars(&self) -> usize {
        self.terms.n_vars()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[inline]
fn accept(theta: &[f64], delta: &[i64], rng: &mut ChaCha8Rng) -> bool {
    let log_ratio: f64 = theta.iter().zip(delta).map(|(t, &d)| t * d as f64).sum();
    log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp()
}

/// Retained draws of one subgraph chain.
#[derive(Clone, Debug)]
pub struct SubgraphSample {
    pub stats: StatSample,
    pub states: Option<Vec<SubgraphState>>,
    pub acceptance_rate: f64,
}

/// Runs burn-in, then records `n` draws spaced by the configured interval.
pub fn run_chain(
    chain: &mut SubgraphChain,
    cfg: &McmcConfig,
    n: usize,
    keep_states: bool,
    rng: &mut ChaCha8Rng,
) -> SubgraphSample {
    let d = chain.n_vars();
    let mut stats = StatSample::new(chain.stats().len());
    let mut states = keep_states.then(|| Vec::with_capacity(n));
    if d > 0 {
        chain.run(cfg.burnin_toggles(d), rng);
    }
    let interval = cfg.interval_toggles(d);
    for _ in 0..n {
        if d > 0 {
            chain.run(interval, rng);
        }
        stats.push(chain.stats());
        if let Some(s) = states.as_mut() {
            s.push(chain.state().clone());
        }
    }
    SubgraphSample { stats, states, acceptance_rate: chain.acceptance_rate() }
}

/// Samples subgraph `r` from its marginal law under `theta`, starting from
/// `init` (the empty subgraph when `None`). Uses stream
/// `(seed, replication 0, subgraph index)`.
pub fn sample_subgraph(
    spec: &ModelSpec,
    theta: &ParamVector,
    r: SubgraphRef,
    cfg: &McmcConfig,
    init: Option<SubgraphState>,
    keep_states: bool,
) -> Result<SubgraphSample> {
    cfg.validate()?;
    sample_subgraph_rep(spec, theta, r, cfg, 0, init, keep_states)
}

fn sample_subgraph_rep(
    spec: &ModelSpec,
    theta: &ParamVector,
    r: SubgraphRef,
    cfg: &McmcConfig,
    replication: u64,
    init: Option<SubgraphState>,
    keep_states: bool,
) -> Result<SubgraphSample> {
    let terms = spec.subgraph_terms(r)?;
    let state = init.unwrap_or_else(|| terms.empty_state());
    let slice = theta.part(r.is_within());
    let mut chain = SubgraphChain::new(terms, slice, state)?;
    let idx = spec.partition().subgraph_index(r) as u64;
    let mut rng = rng::stream(cfg.seed, &[rng::domain::SAMPLE_GRAPH, replication, idx]);
    Ok(run_chain(&mut chain, cfg, cfg.n_samples, keep_states, &mut rng))
}

/// Which subgraphs [`sample_graph`] draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BetweenMode {
    Sample,
    /// Between-block subgraphs are empty with probability one.
    Empty,
}

fn check_theta(spec: &ModelSpec, theta: &ParamVector) -> Result<()> {
    if theta.within.len() != spec.p() || theta.between.len() != spec.q() {
        return Err(Error::Dimension(format!(
            "model has ({}, {}) parameters, got ({}, {})",
            spec.p(),
            spec.q(),
            theta.within.len(),
            theta.between.len()
        )));
    }
    Ok(())
}

fn sample_all_subgraphs(
    spec: &ModelSpec,
    theta: &ParamVector,
    cfg: &McmcConfig,
    replication: u64,
    between: BetweenMode,
    keep_states: bool,
) -> Result<Vec<(SubgraphRef, Option<SubgraphSample>)>> {
    cfg.validate()?;
    check_theta(spec, theta)?;
    let refs: Vec<SubgraphRef> = spec.partition().subgraphs().collect();
    par::try_map_indexed(refs.len(), |i| {
        let r = refs[i];
        if !r.is_within() && between == BetweenMode::Empty {
            return Ok((r, None));
        }
        Ok((r, Some(sample_subgraph_rep(spec, theta, r, cfg, replication, None, keep_states)?)))
    })
}

/// Draws `cfg.n_samples` whole graphs. Every subgraph chain starts empty
/// and runs on its own stream.
pub fn sample_graph(
    spec: &ModelSpec,
    theta: &ParamVector,
    cfg: &McmcConfig,
    replication: u64,
    between: BetweenMode,
) -> Result<Vec<LocalGraph>> {
    let parts = sample_all_subgraphs(spec, theta, cfg, replication, between, true)?;
    let mut graphs = vec![LocalGraph::new(spec.partition_arc().clone()); cfg.n_samples];
    for (r, sample) in parts {
        if let Some(states) = sample.and_then(|s| s.states) {
            for (g, st) in graphs.iter_mut().zip(states) {
                g.set_subgraph(r, st)?;
            }
        }
    }
    Ok(graphs)
}

/// Full statistic vectors of `cfg.n_samples` whole-graph draws, without
/// materializing the graphs.
pub fn sample_statistics(
    spec: &ModelSpec,
    theta: &ParamVector,
    cfg: &McmcConfig,
    replication: u64,
    between: BetweenMode,
) -> Result<StatSample> {
    let parts = sample_all_subgraphs(spec, theta, cfg, replication, between, false)?;
    let dim = spec.dim();
    let mut total = vec![0i64; cfg.n_samples * dim];
    for (r, sample) in parts {
        let Some(sample) = sample else { continue };
        let off = if r.is_within() { 0 } else { spec.p() };
        for (i, row) in sample.stats.rows().enumerate().take(cfg.n_samples) {
            for (c, v) in row.iter().enumerate() {
                total[i * dim + off + c] += v;
            }
        }
    }
    Ok(StatSample { dim, data: total })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::BlockPartition;
    use crate::model::StatisticTerm::*;

    fn edges_spec(n_blocks: usize, size: usize) -> ModelSpec {
        let p = Arc::new(BlockPartition::equal_blocks(n_blocks, size).unwrap());
        ModelSpec::new(vec![WithinEdgesTotal], vec![BetweenEdgesTotal], p).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut cfg = McmcConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.n_samples = 0;
        assert!(cfg.validate().is_err());
        let cfg = McmcConfig { burnin_multiplier: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_node_block_yields_empty_state() {
        let spec = edges_spec(2, 1);
        let theta = ParamVector::new(vec![0.3], vec![0.0]).unwrap();
        let cfg = McmcConfig { n_samples: 5, ..Default::default() };
        let s = sample_subgraph(&spec, &theta, SubgraphRef::within(0), &cfg, None, true).unwrap();
        assert_eq!(s.stats.len(), 5);
        assert!(s.stats.rows().all(|r| r == [0]));
    }

    #[test]
    fn sample_graph_is_deterministic() {
        let spec = edges_spec(3, 4);
        let theta = ParamVector::new(vec![-0.4], vec![-1.0]).unwrap();
        let cfg = McmcConfig { n_samples: 4, seed: 99, ..Default::default() };
        let a = sample_graph(&spec, &theta, &cfg, 2, BetweenMode::Sample).unwrap();
        let b = sample_graph(&spec, &theta, &cfg, 2, BetweenMode::Sample).unwrap();
        assert_eq!(a, b);
        let c = sample_graph(&spec, &theta, &cfg, 3, BetweenMode::Sample).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_block_graph_matches_subgraph_chain() {
        let spec = edges_spec(1, 5);
        let theta = ParamVector::new(vec![0.2], vec![0.0]).unwrap();
        let cfg = McmcConfig { n_samples: 6, seed: 3, ..Default::default() };
        let graphs = sample_graph(&spec, &theta, &cfg, 0, BetweenMode::Sample).unwrap();
        let sub = sample_subgraph(&spec, &theta, SubgraphRef::within(0), &cfg, None, true).unwrap();
        for (g, st) in graphs.iter().zip(sub.states.unwrap()) {
            assert_eq!(g.subgraph_state(SubgraphRef::within(0)).unwrap(), st);
        }
    }

    #[test]
    fn empty_between_mode() {
        let spec = edges_spec(3, 3);
        let theta = ParamVector::new(vec![0.0], vec![2.0]).unwrap();
        let cfg = McmcConfig { n_samples: 3, seed: 1, ..Default::default() };
        for g in sample_graph(&spec, &theta, &cfg, 0, BetweenMode::Empty).unwrap() {
            for k in 0..3 {
                for l in k + 1..3 {
                    assert_eq!(g.between(k, l).edge_count(), 0);
                }
            }
        }
    }

    #[test]
    fn statistics_match_graph_draws() {
        let p = Arc::new(BlockPartition::equal_blocks(2, 5).unwrap());
        let spec =
            ModelSpec::new(vec![WithinEdgesTotal, WithinTransitiveEdgesTotal], vec![BetweenEdgesTotal], p).unwrap();
        let theta = ParamVector::new(vec![-0.5, 0.4], vec![-1.0]).unwrap();
        let cfg = McmcConfig { n_samples: 10, seed: 8, ..Default::default() };
        let graphs = sample_graph(&spec, &theta, &cfg, 1, BetweenMode::Sample).unwrap();
        let stats = sample_statistics(&spec, &theta, &cfg, 1, BetweenMode::Sample).unwrap();
        for (i, g) in graphs.iter().enumerate() {
            assert_eq!(stats.row(i), spec.compute_statistics(g).unwrap().as_slice());
        }
    }

    #[test]
    fn edge_density_near_one_half() {
        let spec = edges_spec(1, 6);
        let theta = ParamVector::new(vec![0.0], vec![0.0]).unwrap();
        let cfg = McmcConfig { n_samples: 20_000, seed: 4, ..Default::default() };
        let s = sample_subgraph(&spec, &theta, SubgraphRef::within(0), &cfg, None, false).unwrap();
        let density = s.stats.mean()[0] / 15.0;
        // edges are iid Bernoulli(1/2); sd of the mean density ~ 0.001
        assert!((density - 0.5).abs() < 0.01, "density {density}");
    }

    #[test]
    fn covariance_of_known_rows() {
        let s = StatSample::from_rows(2, &[vec![1, 0], vec![3, 2]]);
        assert_eq!(s.mean(), vec![2.0, 1.0]);
        let c = s.covariance();
        assert_eq!(c[(0, 0)], 1.0);
        assert_eq!(c[(0, 1)], 1.0);
    }
}
