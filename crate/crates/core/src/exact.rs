//! Brute-force enumeration of small subgraph state spaces.
//!
//! A table lists the statistic slice of each of the `2^D` states of one
//! subgraph. From it the log-normalizer, mean-value map and Fisher
//! information follow by direct summation; summing tables over subgraphs
//! gives the exact log-likelihood of a whole graph, which Newton's method
//! then maximizes.

use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{within_pair_index, LocalGraph, SubgraphRef, SubgraphState};
use crate::linalg::{self, Matrix};
use crate::model::{ModelSpec, ParamVector, SubgraphTerms};
use crate::par;

/// Default enumeration cap on the number of edge variables per subgraph.
pub const DEFAULT_CAP: usize = 20;

/// Enumerated statistic slices of one subgraph.
///
/// State `v` encodes edge variable `b` in bit `b`, using the same pair
/// order as the graph containers (lexicographic within, row-major between).
#[derive(Clone, Debug)]
pub struct ExactSubgraphTable {
    subgraph: SubgraphRef,
    n_vars: usize,
    dim: usize,
    /// Row-major `2^D x dim`.
    stats: Vec<i64>,
    /// Distinct slices with multiplicities.
    support: Vec<(Vec<i64>, u64)>,
    min: Vec<i64>,
    max: Vec<i64>,
}

impl ExactSubgraphTable {
    pub fn build(spec: &ModelSpec, r: SubgraphRef) -> Result<Self> {
        Self::build_with_cap(spec, r, DEFAULT_CAP)
    }

    pub fn build_with_cap(spec: &ModelSpec, r: SubgraphRef, cap: usize) -> Result<Self> {
        let terms = spec.subgraph_terms(r)?;
        Self::from_terms(&terms, r, cap)
    }

    pub fn from_terms(terms: &SubgraphTerms, r: SubgraphRef, cap: usize) -> Result<Self> {
        let n_vars = terms.n_vars();
        if n_vars > cap {
            return Err(Error::EnumerationCap { k: r.k, l: r.l, dim: n_vars, cap });
        }
        let dim = terms.dim();
        let n_states = 1usize << n_vars;
        let empty = terms.empty_state();
        const CHUNK: usize = 1 << 12;
        let chunks = par::map_indexed(n_states.div_ceil(CHUNK), |c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n_states);
            let mut out = Vec::with_capacity((hi - lo) * dim);
            for v in lo..hi {
                out.extend(state_slice(terms, &empty, v));
            }
            out
        });
        let stats: Vec<i64> = chunks.concat();

        let mut counts: HashMap<&[i64], u64> = HashMap::new();
        for row in stats.chunks(dim.max(1)).take(n_states) {
            *counts.entry(if dim == 0 { &[] } else { row }).or_insert(0) += 1;
        }
        let mut support: Vec<(Vec<i64>, u64)> = counts.into_iter().map(|(k, c)| (k.to_vec(), c)).collect();
        support.sort();
        let mut min = vec![i64::MAX; dim];
        let mut max = vec![i64::MIN; dim];
        for (s, _) in &support {
            for c in 0..dim {
                min[c] = min[c].min(s[c]);
                max[c] = max[c].max(s[c]);
            }
        }
        Ok(Self { subgraph: r, n_vars, dim, stats, support, min, max })
    }

    pub fn subgraph(&self) -> SubgraphRef {
        self.subgraph
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_states(&self) -> usize {
        1 << self.n_vars
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Slice of state `v`.
    pub fn state_stats(&self, v: usize) -> &[i64] {
        &self.stats[v * self.dim..(v + 1) * self.dim]
    }

    pub fn support(&self) -> &[(Vec<i64>, u64)] {
        &self.support
    }

    pub fn min(&self) -> &[i64] {
        &self.min
    }

    pub fn max(&self) -> &[i64] {
        &self.max
    }

    fn slice_of<'a>(&self, theta: &'a ParamVector) -> Result<&'a [f64]> {
        let t = theta.part(self.subgraph.is_within());
        if t.len() != self.dim {
            return Err(Error::Dimension(format!("table has dimension {}, parameter has {}", self.dim, t.len())));
        }
        Ok(t)
    }

    /// `(psi, mu, Fisher information)` at the parameter slice `t`, in one
    /// max-shifted pass over the support.
    pub fn moments(&self, t: &[f64]) -> (f64, Vec<f64>, Matrix) {
        let d = self.dim;
        let eta: Vec<f64> = self.support.iter().map(|(s, _)| dot_i(t, s)).collect();
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        let mut m1 = vec![0.0; d];
        let mut m2 = Matrix::zeros(d, d);
        for ((s, c), e) in self.support.iter().zip(&eta) {
            let w = *c as f64 * (e - shift).exp();
            z += w;
            for a in 0..d {
                m1[a] += w * s[a] as f64;
            }
        }
        let mean: Vec<f64> = m1.iter().map(|v| v / z).collect();
        for ((s, c), e) in self.support.iter().zip(&eta) {
            let w = *c as f64 * (e - shift).exp() / z;
            for a in 0..d {
                let da = s[a] as f64 - mean[a];
                for b in a..d {
                    m2[(a, b)] += w * da * (s[b] as f64 - mean[b]);
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                m2[(a, b)] = m2[(b, a)];
            }
        }
        (shift + z.ln(), mean, m2)
    }

    pub fn log_normalizer_slice(&self, t: &[f64]) -> f64 {
        let eta: Vec<f64> = self.support.iter().map(|(s, _)| dot_i(t, s)).collect();
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = self.support.iter().zip(&eta).map(|((_, c), e)| *c as f64 * (e - shift).exp()).sum();
        shift + z.ln()
    }

    /// Exact probability of every state, indexed like [`state_stats`](Self::state_stats).
    pub fn state_probabilities(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        let t = self.slice_of(theta)?;
        let psi = self.log_normalizer_slice(t);
        Ok((0..self.n_states()).map(|v| (dot_i(t, self.state_stats(v)) - psi).exp()).collect())
    }
}

fn dot_i(t: &[f64], s: &[i64]) -> f64 {
    t.iter().zip(s).map(|(a, &b)| a * b as f64).sum()
}

/// Statistic slice of the state encoded by `mask`, evaluated directly from
/// the adjacency (not through change statistics).
fn state_slice(terms: &SubgraphTerms, empty: &SubgraphState, mask: usize) -> Vec<i64> {
    match empty {
        SubgraphState::Within(w) => {
            let size = w.size();
            terms.within_slice_with(size, |r, s| {
                let (a, b) = if r < s { (r, s) } else { (s, r) };
                (mask >> within_pair_index(size, a, b)) & 1 == 1
            })
        }
        SubgraphState::Between(b) => {
            let mut st = b.clone();
            for bit in 0..terms.n_vars() {
                if (mask >> bit) & 1 == 1 {
                    st.toggle(bit / b.cols(), bit % b.cols());
                }
            }
            terms.between_slice(&st)
        }
    }
}

/// Encodes a subgraph state as its enumeration index.
pub fn state_index(st: &SubgraphState) -> usize {
    let bits = match st {
        SubgraphState::Within(w) => w.bits(),
        SubgraphState::Between(b) => b.bits(),
    };
    bits.ones().fold(0usize, |acc, b| acc | (1 << b))
}

/// `psi_{k,l}(theta)`, the log-normalizer of one subgraph.
pub fn exact_log_normalizer(table: &ExactSubgraphTable, theta: &ParamVector) -> Result<f64> {
    Ok(table.log_normalizer_slice(table.slice_of(theta)?))
}

/// Mean of the subgraph's statistic slice.
pub fn exact_mean_value(table: &ExactSubgraphTable, theta: &ParamVector) -> Result<Vec<f64>> {
    Ok(table.moments(table.slice_of(theta)?).1)
}

/// Covariance of the subgraph's statistic slice.
pub fn exact_fisher_info(table: &ExactSubgraphTable, theta: &ParamVector) -> Result<Matrix> {
    Ok(table.moments(table.slice_of(theta)?).2)
}

/// Tables for every subgraph of a model, shared between subgraphs with the
/// same law.
#[derive(Clone, Debug)]
pub struct ExactModel {
    p: usize,
    q: usize,
    /// (table, multiplicity) for within then between classes.
    within: Vec<(Arc<ExactSubgraphTable>, usize)>,
    between: Vec<(Arc<ExactSubgraphTable>, usize)>,
    /// Edge variables of subgraphs no coordinate depends on; they add
    /// `D log 2` to the log-normalizer and nothing else.
    inert_vars: usize,
}

impl ExactModel {
    pub fn build(spec: &ModelSpec, cap: usize) -> Result<Self> {
        let mut within: Vec<(SubgraphTerms, SubgraphRef, usize)> = Vec::new();
        let mut between: Vec<(SubgraphTerms, SubgraphRef, usize)> = Vec::new();
        let mut index: HashMap<SubgraphTerms, (bool, usize)> = HashMap::new();
        let mut inert_vars = 0;
        for r in spec.partition().subgraphs() {
            let terms = spec.subgraph_terms(r)?;
            if terms.is_inert() {
                inert_vars += terms.n_vars();
                continue;
            }
            let key = terms.law_key();
            let list = if r.is_within() { &mut within } else { &mut between };
            match index.get(&key) {
                Some(&(_, pos)) => list[pos].2 += 1,
                None => {
                    index.insert(key, (r.is_within(), list.len()));
                    list.push((terms, r, 1));
                }
            }
        }
        let tabulate =
            |list: Vec<(SubgraphTerms, SubgraphRef, usize)>| -> Result<Vec<(Arc<ExactSubgraphTable>, usize)>> {
                list.into_iter()
                    .map(|(t, r, n)| Ok((Arc::new(ExactSubgraphTable::from_terms(&t, r, cap)?), n)))
                    .collect()
            };
        Ok(Self { p: spec.p(), q: spec.q(), within: tabulate(within)?, between: tabulate(between)?, inert_vars })
    }

    fn parts(&self) -> [(&[(Arc<ExactSubgraphTable>, usize)], usize, usize); 2] {
        [(&self.within, 0, self.p), (&self.between, self.p, self.q)]
    }

    /// `psi(theta)` of the whole graph.
    pub fn log_normalizer(&self, theta: &[f64]) -> f64 {
        let mut psi = self.inert_vars as f64 * std::f64::consts::LN_2;
        for (tables, off, d) in self.parts() {
            for (t, n) in tables {
                psi += *n as f64 * t.log_normalizer_slice(&theta[off..off + d]);
            }
        }
        psi
    }

    /// `(psi, mu, I)` of the whole graph; `I` is block diagonal.
    pub fn moments(&self, theta: &[f64]) -> (f64, Vec<f64>, Matrix) {
        let dim = self.p + self.q;
        let mut psi = self.inert_vars as f64 * std::f64::consts::LN_2;
        let mut mu = vec![0.0; dim];
        let mut info = Matrix::zeros(dim, dim);
        for (tables, off, d) in self.parts() {
            for (t, n) in tables {
                let (ps, m, i) = t.moments(&theta[off..off + d]);
                let n = *n as f64;
                psi += n * ps;
                for a in 0..d {
                    mu[off + a] += n * m[a];
                    for b in 0..d {
                        info[(off + a, off + b)] += n * i[(a, b)];
                    }
                }
            }
        }
        (psi, mu, info)
    }

    pub fn log_likelihood(&self, theta: &[f64], observed: &[f64]) -> f64 {
        theta.iter().zip(observed).map(|(a, b)| a * b).sum::<f64>() - self.log_normalizer(theta)
    }

    /// Coordinate-wise attainable range of the full statistic.
    pub fn bounds(&self) -> (Vec<i64>, Vec<i64>) {
        let dim = self.p + self.q;
        let mut lo = vec![0; dim];
        let mut hi = vec![0; dim];
        for (tables, off, d) in self.parts() {
            for (t, n) in tables {
                for a in 0..d {
                    lo[off + a] += *n as i64 * t.min()[a];
                    hi[off + a] += *n as i64 * t.max()[a];
                }
            }
        }
        (lo, hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MleStatus {
    Converged,
    SuspectedNonexistence,
    MaxIter,
}

#[derive(Clone, Debug)]
pub struct ExactMleOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub cap: usize,
    /// Parameter magnitude beyond which the estimate is declared divergent.
    pub divergence: f64,
}

impl Default for ExactMleOptions {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-8, cap: DEFAULT_CAP, divergence: 30.0 }
    }
}

#[derive(Clone, Debug)]
pub struct ExactMle {
    pub theta: ParamVector,
    pub status: MleStatus,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub log_likelihood: f64,
}

/// Maximizes the exact log-likelihood by damped Newton iteration.
pub fn exact_mle(g: &LocalGraph, spec: &ModelSpec, opts: &ExactMleOptions) -> Result<ExactMle> {
    let model = ExactModel::build(spec, opts.cap)?;
    let observed = spec.compute_statistics(g)?.to_f64();
    exact_mle_from_stats(&model, spec, &observed, opts)
}

/// Newton iteration given prebuilt tables and observed statistics.
pub fn exact_mle_from_stats(
    model: &ExactModel,
    spec: &ModelSpec,
    observed: &[f64],
    opts: &ExactMleOptions,
) -> Result<ExactMle> {
    let dim = spec.dim();
    let mut theta = vec![0.0; dim];
    let (lo, hi) = model.bounds();
    let finish = |theta: Vec<f64>, status, iterations, gradient_norm, ll| -> Result<ExactMle> {
        Ok(ExactMle {
            theta: ParamVector::from_flat(spec, &theta)?,
            status,
            iterations,
            gradient_norm,
            log_likelihood: ll,
        })
    };
    if observed.iter().zip(lo.iter().zip(&hi)).any(|(&s, (&a, &b))| s <= a as f64 || s >= b as f64) {
        let ll = model.log_likelihood(&theta, observed);
        return finish(theta, MleStatus::SuspectedNonexistence, 0, f64::NAN, ll);
    }

    for it in 0..opts.max_iter {
        let (psi, mu, info) = model.moments(&theta);
        let ll = dot(&theta, observed) - psi;
        let grad: Vec<f64> = observed.iter().zip(&mu).map(|(s, m)| s - m).collect();
        let gnorm = grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if gnorm < opts.tol {
            return finish(theta, MleStatus::Converged, it, gnorm, ll);
        }
        let step = linalg::solve_regularized(&info, &grad);
        let mut scale = 1.0;
        let mut next = theta.clone();
        for _ in 0..=30 {
            next = theta.iter().zip(&step).map(|(t, d)| t + scale * d).collect();
            if model.log_likelihood(&next, observed) >= ll {
                break;
            }
            scale *= 0.5;
        }
        theta = next;
        if theta.iter().any(|t| t.abs() > opts.divergence) {
            let ll = model.log_likelihood(&theta, observed);
            return finish(theta, MleStatus::SuspectedNonexistence, it + 1, gnorm, ll);
        }
    }
    let (psi, mu, _) = model.moments(&theta);
    let gnorm = observed.iter().zip(&mu).fold(0.0f64, |a, (s, m)| a.max((s - m).abs()));
    let ll = dot(&theta, observed) - psi;
    finish(theta, MleStatus::MaxIter, opts.max_iter, gnorm, ll)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BlockPartition;
    use crate::model::StatisticTerm::*;

    fn block_spec(size: usize, terms: Vec<crate::StatisticTerm>) -> ModelSpec {
        ModelSpec::new(terms, vec![], Arc::new(BlockPartition::equal_blocks(1, size).unwrap())).unwrap()
    }

    fn theta(w: &[f64]) -> ParamVector {
        ParamVector::new(w.to_vec(), vec![]).unwrap()
    }

    #[test]
    fn edges_only_closed_form() {
        let spec = block_spec(3, vec![WithinEdgesTotal]);
        let t = ExactSubgraphTable::build(&spec, SubgraphRef::within(0)).unwrap();
        assert_eq!(t.n_states(), 8);
        let psi0 = exact_log_normalizer(&t, &theta(&[0.0])).unwrap();
        assert!((psi0 - 3.0 * 2f64.ln()).abs() < 1e-12);
        let psi = exact_log_normalizer(&t, &theta(&[0.5])).unwrap();
        assert!((psi - 3.0 * (1.0 + 0.5f64.exp()).ln()).abs() < 1e-12);
        assert!((psi - 2.9223).abs() < 1e-4);

        assert!((exact_mean_value(&t, &theta(&[0.0])).unwrap()[0] - 1.5).abs() < 1e-12);
        let logit = (0.25f64 / 0.75).ln();
        assert!((exact_mean_value(&t, &theta(&[logit])).unwrap()[0] - 0.75).abs() < 1e-12);
        assert!((exact_fisher_info(&t, &theta(&[0.0])).unwrap()[(0, 0)] - 0.75).abs() < 1e-12);
    }

    // frozen from a hand enumeration of the 8 triangle states:
    // one empty, three single edges, three 2-paths, one triangle (3, 3)
    #[test]
    fn triangle_with_transitivity() {
        let spec = block_spec(3, vec![WithinEdgesTotal, WithinTransitiveEdgesTotal]);
        let t = ExactSubgraphTable::build(&spec, SubgraphRef::within(0)).unwrap();
        let psi = exact_log_normalizer(&t, &theta(&[-1.0, 0.5])).unwrap();
        let expect = (1.0 + 3.0 * (-1.0f64).exp() + 3.0 * (-2.0f64).exp() + (-1.5f64).exp()).ln();
        assert!((psi - expect).abs() < 1e-12);
        assert!((psi - 1.005317332505872).abs() < 1e-12);
        let mu = exact_mean_value(&t, &theta(&[0.0, 0.0])).unwrap();
        assert!((mu[0] - 1.5).abs() < 1e-12);
        assert!((mu[1] - 0.375).abs() < 1e-12);
    }

    #[test]
    fn constant_term_has_zero_information() {
        // a 2-node block has no transitive edges
        let spec = block_spec(2, vec![WithinEdgesTotal, WithinTransitiveEdgesTotal]);
        let t = ExactSubgraphTable::build(&spec, SubgraphRef::within(0)).unwrap();
        let i = exact_fisher_info(&t, &theta(&[0.3, -0.2])).unwrap();
        assert_eq!(i[(1, 1)], 0.0);
        assert_eq!(i[(0, 1)], 0.0);
        assert!(i[(0, 0)] > 0.0);
    }

    #[test]
    fn cap_is_enforced() {
        let spec = block_spec(7, vec![WithinEdgesTotal]);
        let err = ExactSubgraphTable::build(&spec, SubgraphRef::within(0)).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { dim: 21, cap: 20, .. }));
    }

    #[test]
    fn between_closed_form() {
        let p = Arc::new(BlockPartition::new(7, vec![vec![0, 1, 2], vec![3, 4, 5, 6]]).unwrap());
        let spec = ModelSpec::new(vec![], vec![BetweenEdgesTotal], p).unwrap();
        let t = ExactSubgraphTable::build(&spec, SubgraphRef { k: 0, l: 1 }).unwrap();
        let th = ParamVector::new(vec![], vec![-0.7]).unwrap();
        let psi = exact_log_normalizer(&t, &th).unwrap();
        assert!((psi - 12.0 * (1.0 + (-0.7f64).exp()).ln()).abs() < 1e-10);
    }

    #[test]
    fn state_index_round_trips_bits() {
        let spec = block_spec(4, vec![WithinEdgesTotal, WithinTransitiveEdgesTotal]);
        let t = ExactSubgraphTable::build(&spec, SubgraphRef::within(0)).unwrap();
        let g = LocalGraph::from_edges(spec.partition_arc().clone(), &[(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap();
        let v = state_index(&g.subgraph_state(SubgraphRef::within(0)).unwrap());
        assert_eq!(t.state_stats(v), spec.compute_statistics(&g).unwrap().as_slice());
    }

    #[test]
    fn independent_edge_mle_is_logit_density() {
        let p = Arc::new(BlockPartition::equal_blocks(2, 4).unwrap());
        let spec =
            ModelSpec::new(vec![WithinEdgesPerBlock(0), WithinEdgesPerBlock(1)], vec![BetweenEdgesTotal], p.clone())
                .unwrap();
        let g = LocalGraph::from_edges(p, &[(0, 1), (1, 2), (4, 5), (4, 6), (5, 6), (6, 7), (0, 4), (3, 7)]).unwrap();
        let mle = exact_mle(&g, &spec, &ExactMleOptions::default()).unwrap();
        assert_eq!(mle.status, MleStatus::Converged);
        let logit = |d: f64| (d / (1.0 - d)).ln();
        assert!((mle.theta.within[0] - logit(2.0 / 6.0)).abs() < 1e-7);
        assert!((mle.theta.within[1] - logit(4.0 / 6.0)).abs() < 1e-7);
        assert!((mle.theta.between[0] - logit(2.0 / 16.0)).abs() < 1e-7);
    }

    #[test]
    fn complete_block_is_boundary() {
        let p = Arc::new(BlockPartition::equal_blocks(2, 3).unwrap());
        let spec = ModelSpec::new(vec![WithinEdgesPerBlock(0), WithinEdgesPerBlock(1)], vec![], p.clone()).unwrap();
        let g = LocalGraph::from_edges(p, &[(0, 1), (0, 2), (1, 2), (3, 4)]).unwrap();
        let mle = exact_mle(&g, &spec, &ExactMleOptions::default()).unwrap();
        assert_eq!(mle.status, MleStatus::SuspectedNonexistence);
    }
}
