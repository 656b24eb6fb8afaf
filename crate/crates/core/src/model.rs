//! Statistic terms, model specifications and statistic evaluation.
//!
//! A [`ModelSpec`] orders its within-block terms (dimension `p`) before its
//! between-block terms (dimension `q`). Evaluation is organized per
//! subgraph: each subgraph compiles its own [`SubgraphTerms`], which knows
//! which coordinates a toggle inside that subgraph can move.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{BetweenState, BlockPartition, LocalGraph, SubgraphRef, SubgraphState, WithinState};

/// Sufficient-statistic terms. Block, pair and group indices are 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatisticTerm {
    /// Number of within-block edges.
    WithinEdgesTotal,
    /// Number of edges inside block `k`.
    WithinEdgesPerBlock(usize),
    /// Within-block edges counted once per endpoint in node group `m`.
    WithinEdgesByNodeGroup(usize),
    /// Within-block edges whose endpoints share a within-block partner.
    WithinTransitiveEdgesTotal,
    /// Transitive edges restricted to blocks of block group `l`.
    WithinTransitiveEdgesByBlockGroup(usize),
    /// Number of between-block edges.
    BetweenEdgesTotal,
    /// Number of edges between blocks `k < l`.
    BetweenEdgesPerPair(usize, usize),
}

impl StatisticTerm {
    pub fn is_within(&self) -> bool {
        !matches!(self, StatisticTerm::BetweenEdgesTotal | StatisticTerm::BetweenEdgesPerPair(..))
    }

    /// Whether the term responds to the number of edges (as opposed to the
    /// transitive-edge terms).
    pub fn is_edge_type(&self) -> bool {
        !matches!(self, StatisticTerm::WithinTransitiveEdgesTotal | StatisticTerm::WithinTransitiveEdgesByBlockGroup(_))
    }

    /// Column name used in CSV/JSON output; indices are printed 1-based.
    pub fn name(&self) -> String {
        match *self {
            StatisticTerm::WithinEdgesTotal => "within_edges".into(),
            StatisticTerm::WithinEdgesPerBlock(k) => format!("within_edges_block_{}", k + 1),
            StatisticTerm::WithinEdgesByNodeGroup(m) => format!("nodefactor_{}", m + 1),
            StatisticTerm::WithinTransitiveEdgesTotal => "transitive_edges".into(),
            StatisticTerm::WithinTransitiveEdgesByBlockGroup(l) => format!("transitive_edges_bgroup_{}", l + 1),
            StatisticTerm::BetweenEdgesTotal => "between_edges".into(),
            StatisticTerm::BetweenEdgesPerPair(k, l) => format!("between_edges_pair_{}_{}", k + 1, l + 1),
        }
    }

    fn validate(&self, partition: &BlockPartition) -> Result<()> {
        let n_blocks = partition.n_blocks();
        let bad = |msg: String| Err(Error::InvalidModel(format!("{}: {msg}", self.name())));
        match *self {
            StatisticTerm::WithinEdgesPerBlock(k) if k >= n_blocks => bad(format!("no block {}", k + 1)),
            StatisticTerm::WithinEdgesByNodeGroup(m) => {
                if !partition.has_node_groups() {
                    bad("partition has no node groups".into())
                } else if m >= partition.n_node_groups() {
                    bad(format!("no node group {}", m + 1))
                } else {
                    Ok(())
                }
            }
            StatisticTerm::WithinTransitiveEdgesByBlockGroup(l) => {
                if !partition.has_block_groups() {
                    bad("partition has no block groups".into())
                } else if l >= partition.n_block_groups() {
                    bad(format!("no block group {}", l + 1))
                } else {
                    Ok(())
                }
            }
            StatisticTerm::BetweenEdgesPerPair(k, l) if k >= l || l >= n_blocks => {
                bad(format!("invalid block pair ({}, {})", k + 1, l + 1))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for StatisticTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Natural parameters `theta = (theta_W, theta_B)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    pub within: Vec<f64>,
    pub between: Vec<f64>,
}

impl ParamVector {
    pub fn new(within: Vec<f64>, between: Vec<f64>) -> Result<Self> {
        if within.iter().chain(&between).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("parameter vector has non-finite entries".into()));
        }
        Ok(Self { within, between })
    }

    pub fn zeros(spec: &ModelSpec) -> Self {
        Self { within: vec![0.0; spec.p()], between: vec![0.0; spec.q()] }
    }

    /// Splits a concatenated `(theta_W, theta_B)` vector.
    pub fn from_flat(spec: &ModelSpec, flat: &[f64]) -> Result<Self> {
        if flat.len() != spec.dim() {
            return Err(Error::Dimension(format!("expected {} parameters, got {}", spec.dim(), flat.len())));
        }
        Self::new(flat[..spec.p()].to_vec(), flat[spec.p()..].to_vec())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.within.iter().chain(&self.between).copied().collect()
    }

    pub fn part(&self, within: bool) -> &[f64] {
        if within {
            &self.within
        } else {
            &self.between
        }
    }
}

/// Value of the sufficient statistic, ordered within terms then between
/// terms. Counts are exact integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StatVector(pub Vec<i64>);

impl StatVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| v as f64).collect()
    }

    pub fn add_assign(&mut self, other: &StatVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }
}

/// Ordered model terms bound to a partition.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    within: Vec<StatisticTerm>,
    between: Vec<StatisticTerm>,
    partition: Arc<BlockPartition>,
}

impl ModelSpec {
    pub fn new(
        within: Vec<StatisticTerm>,
        between: Vec<StatisticTerm>,
        partition: Arc<BlockPartition>,
    ) -> Result<Self> {
        if within.is_empty() && between.is_empty() {
            return Err(Error::InvalidModel("model has no terms".into()));
        }
        if let Some(t) = within.iter().find(|t| !t.is_within()) {
            return Err(Error::InvalidModel(format!("{t} is not a within-block term")));
        }
        if let Some(t) = between.iter().find(|t| t.is_within()) {
            return Err(Error::InvalidModel(format!("{t} is not a between-block term")));
        }
        let mut seen = HashSet::new();
        for t in within.iter().chain(&between) {
            t.validate(&partition)?;
            if !seen.insert(t.clone()) {
                return Err(Error::InvalidModel(format!("duplicate term {t}")));
            }
        }
        Ok(Self { within, between, partition })
    }

    pub fn within_terms(&self) -> &[StatisticTerm] {
        &self.within
    }

    pub fn between_terms(&self) -> &[StatisticTerm] {
        &self.between
    }

    pub fn terms(&self) -> impl Iterator<Item = &StatisticTerm> {
        self.within.iter().chain(&self.between)
    }

    pub fn term_names(&self) -> Vec<String> {
        self.terms().map(StatisticTerm::name).collect()
    }

    pub fn p(&self) -> usize {
        self.within.len()
    }

    pub fn q(&self) -> usize {
        self.between.len()
    }

    pub fn dim(&self) -> usize {
        self.p() + self.q()
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn partition_arc(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    fn check_graph(&self, g: &LocalGraph) -> Result<()> {
        if !Arc::ptr_eq(g.partition_arc(), &self.partition) && g.partition() != &*self.partition {
            return Err(Error::InvalidModel("graph partition differs from the model partition".into()));
        }
        Ok(())
    }

    /// Compiles the evaluator for one subgraph.
    pub fn subgraph_terms(&self, r: SubgraphRef) -> Result<SubgraphTerms> {
        let p = &*self.partition;
        p.check_ref(r)?;
        if r.is_within() {
            let size = p.block_size(r.k);
            let mut edge = Vec::new();
            let mut transitive = Vec::new();
            let mut group_coord = vec![None; p.n_node_groups()];
            for (c, t) in self.within.iter().enumerate() {
                match *t {
                    StatisticTerm::WithinEdgesTotal => edge.push(c),
                    StatisticTerm::WithinEdgesPerBlock(k) if k == r.k => edge.push(c),
                    StatisticTerm::WithinEdgesByNodeGroup(m) => group_coord[m] = Some(c),
                    StatisticTerm::WithinTransitiveEdgesTotal => transitive.push(c),
                    StatisticTerm::WithinTransitiveEdgesByBlockGroup(l) if p.block_group(r.k) == Some(l) => {
                        transitive.push(c)
                    }
                    _ => {}
                }
            }
            let rank_coord: Vec<Option<usize>> = if group_coord.iter().any(Option::is_some) {
                p.block(r.k).iter().map(|&i| p.node_group(i).and_then(|m| group_coord[m])).collect()
            } else {
                Vec::new()
            };
            Ok(SubgraphTerms { within: true, dim: self.p(), size, cols: 0, edge, rank_coord, transitive })
        } else {
            let edge = self
                .between
                .iter()
                .enumerate()
                .filter(|(_, t)| match **t {
                    StatisticTerm::BetweenEdgesTotal => true,
                    StatisticTerm::BetweenEdgesPerPair(k, l) => (k, l) == (r.k, r.l),
                    _ => false,
                })
                .map(|(c, _)| c)
                .collect();
            Ok(SubgraphTerms {
                within: false,
                dim: self.q(),
                size: p.block_size(r.k),
                cols: p.block_size(r.l),
                edge,
                rank_coord: Vec::new(),
                transitive: Vec::new(),
            })
        }
    }

    /// Statistic slice (length `p` for within, `q` for between) of one
    /// subgraph, recomputed from the edge bits.
    pub fn subgraph_slice(&self, g: &LocalGraph, r: SubgraphRef) -> Result<Vec<i64>> {
        self.check_graph(g)?;
        let terms = self.subgraph_terms(r)?;
        Ok(if r.is_within() {
            terms.within_slice_direct(g.within(r.k))
        } else {
            terms.between_slice(g.between(r.k, r.l))
        })
    }

    /// Contribution of subgraph `r` in the full `p + q` layout.
    pub fn subgraph_statistics(&self, g: &LocalGraph, r: SubgraphRef) -> Result<StatVector> {
        let slice = self.subgraph_slice(g, r)?;
        let mut out = StatVector::zeros(self.dim());
        let offset = if r.is_within() { 0 } else { self.p() };
        out.0[offset..offset + slice.len()].copy_from_slice(&slice);
        Ok(out)
    }

    /// `s(x)`, as the sum of all subgraph contributions.
    pub fn compute_statistics(&self, g: &LocalGraph) -> Result<StatVector> {
        let mut total = StatVector::zeros(self.dim());
        for r in self.partition.subgraphs() {
            if (r.is_within() && self.p() == 0) || (!r.is_within() && self.q() == 0) {
                continue;
            }
            total.add_assign(&self.subgraph_statistics(g, r)?);
        }
        Ok(total)
    }

    /// `s(x with X_{i,j} toggled) - s(x)`.
    pub fn change_statistics(&self, g: &LocalGraph, i: usize, j: usize) -> Result<StatVector> {
        self.check_graph(g)?;
        g.has_edge(i, j)?;
        let p = &*self.partition;
        let r = p.container_of(i, j);
        let terms = self.subgraph_terms(r)?;
        let mut slice = vec![0; terms.dim];
        let (ri, rj) = (p.rank_of(i), p.rank_of(j));
        if r.is_within() {
            terms.within_delta(g.within(r.k), ri, rj, &mut slice);
        } else if p.block_of(i) == r.k {
            terms.between_delta(g.between(r.k, r.l), ri, rj, &mut slice);
        } else {
            terms.between_delta(g.between(r.k, r.l), rj, ri, &mut slice);
        }
        let mut out = StatVector::zeros(self.dim());
        let offset = if r.is_within() { 0 } else { self.p() };
        out.0[offset..offset + slice.len()].copy_from_slice(&slice);
        Ok(out)
    }

    /// Largest attainable value of every coordinate. All catalog terms are
    /// counts minimized by the empty graph and maximized by the complete one.
    pub fn max_attainable(&self) -> Result<StatVector> {
        let mut out = StatVector::zeros(self.dim());
        for r in self.partition.subgraphs() {
            let terms = self.subgraph_terms(r)?;
            let offset = if r.is_within() { 0 } else { self.p() };
            for (c, v) in terms.complete_slice().into_iter().enumerate() {
                out.0[offset + c] += v;
            }
        }
        Ok(out)
    }
}

/// Term evaluator compiled for one subgraph.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubgraphTerms {
    within: bool,
    dim: usize,
    size: usize,
    cols: usize,
    edge: Vec<usize>,
    /// Node-group coordinate of each local rank (within only; empty when the
    /// model has no node-group terms).
    rank_coord: Vec<Option<usize>>,
    transitive: Vec<usize>,
}

impl SubgraphTerms {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_within(&self) -> bool {
        self.within
    }

    /// Number of edge variables of the subgraph.
    pub fn n_vars(&self) -> usize {
        if self.within {
            self.size * self.size.saturating_sub(1) / 2
        } else {
            self.size * self.cols
        }
    }

    /// Whether no coordinate depends on this subgraph.
    pub fn is_inert(&self) -> bool {
        self.edge.is_empty() && self.transitive.is_empty() && self.rank_coord.iter().all(Option::is_none)
    }

    /// Key identifying the subgraph's law up to relabeling of its nodes:
    /// two subgraphs with equal keys have identically distributed
    /// statistic slices under every parameter.
    pub fn law_key(&self) -> SubgraphTerms {
        let mut key = self.clone();
        key.rank_coord.sort_unstable();
        if !key.within {
            key.cols = self.size * self.cols;
            key.size = 1;
        }
        key
    }

    pub fn empty_state(&self) -> SubgraphState {
        if self.within {
            SubgraphState::Within(WithinState::new(self.size))
        } else {
            SubgraphState::Between(BetweenState::new(self.size, self.cols))
        }
    }

    /// Slice computed from the edge bits alone, with shared partners
    /// counted from scratch.
    pub fn within_slice_direct(&self, st: &WithinState) -> Vec<i64> {
        self.within_slice_with(st.size(), |r, s| st.has(r, s))
    }

    /// Slice of an arbitrary within-block adjacency predicate.
    pub fn within_slice_with(&self, size: usize, adj: impl Fn(usize, usize) -> bool) -> Vec<i64> {
        let mut out = vec![0; self.dim];
        let mut edges = 0i64;
        let mut transitive = 0i64;
        let mut degree = vec![0i64; size];
        for r in 0..size {
            for s in r + 1..size {
                if !adj(r, s) {
                    continue;
                }
                edges += 1;
                degree[r] += 1;
                degree[s] += 1;
                if !self.transitive.is_empty() && (0..size).any(|h| h != r && h != s && adj(r, h) && adj(s, h)) {
                    transitive += 1;
                }
            }
        }
        for &c in &self.edge {
            out[c] += edges;
        }
        for (r, c) in self.rank_coord.iter().enumerate() {
            if let Some(c) = *c {
                out[c] += degree[r];
            }
        }
        for &c in &self.transitive {
            out[c] += transitive;
        }
        out
    }

    /// Slice read off the maintained counters of a within state.
    pub fn within_slice_fast(&self, st: &WithinState) -> Vec<i64> {
        let mut out = vec![0; self.dim];
        for &c in &self.edge {
            out[c] += st.edge_count() as i64;
        }
        for &c in &self.transitive {
            out[c] += st.transitive_count() as i64;
        }
        if !self.rank_coord.is_empty() {
            for r in 0..st.size() {
                if let Some(c) = self.rank_coord[r] {
                    out[c] += (0..st.size()).filter(|&h| st.has(r, h)).count() as i64;
                }
            }
        }
        out
    }

    pub fn between_slice(&self, st: &BetweenState) -> Vec<i64> {
        let mut out = vec![0; self.dim];
        for &c in &self.edge {
            out[c] += st.edge_count() as i64;
        }
        out
    }

    pub fn slice(&self, st: &SubgraphState) -> Vec<i64> {
        match st {
            SubgraphState::Within(w) => self.within_slice_fast(w),
            SubgraphState::Between(b) => self.between_slice(b),
        }
    }

    /// Adds the change caused by toggling local pair `(r, s)` into `out`.
    #[inline]
    pub fn within_delta(&self, st: &WithinState, r: usize, s: usize, out: &mut [i64]) {
        let sign = if st.has(r, s) { -1 } else { 1 };
        for &c in &self.edge {
            out[c] += sign;
        }
        if !self.rank_coord.is_empty() {
            if let Some(c) = self.rank_coord[r] {
                out[c] += sign;
            }
            if let Some(c) = self.rank_coord[s] {
                out[c] += sign;
            }
        }
        if !self.transitive.is_empty() {
            let d = st.transitive_delta(r, s);
            for &c in &self.transitive {
                out[c] += d;
            }
        }
    }

    #[inline]
    pub fn between_delta(&self, st: &BetweenState, r: usize, c: usize, out: &mut [i64]) {
        let sign = if st.has(r, c) { -1 } else { 1 };
        for &coord in &self.edge {
            out[coord] += sign;
        }
    }

    /// Slice of the complete subgraph.
    pub fn complete_slice(&self) -> Vec<i64> {
        let mut out = vec![0; self.dim];
        let d = self.n_vars() as i64;
        for &c in &self.edge {
            out[c] += d;
        }
        if self.within {
            for c in self.rank_coord.iter().flatten() {
                out[*c] += self.size as i64 - 1;
            }
            let t = if self.size >= 3 { d } else { 0 };
            for &c in &self.transitive {
                out[c] += t;
            }
        }
        out
    }
}
