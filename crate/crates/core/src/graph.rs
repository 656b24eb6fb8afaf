//! Node partition and block-organized edge storage.
//!
//! Every unordered node pair lives in exactly one container: the
//! within-block container of its common block, or the between-block
//! container of its (ordered) block pair. Containers address pairs by the
//! local ranks of their endpoints, so a container can be cloned out, driven
//! by a sampler and written back without touching the rest of the graph.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Partition of nodes `0..n` into `K` non-empty blocks, with optional node
/// groups and block groups. All indices are 0-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    n_nodes: usize,
    blocks: Vec<Vec<usize>>,
    node_block: Vec<usize>,
    node_rank: Vec<usize>,
    node_groups: Option<Vec<usize>>,
    n_node_groups: usize,
    block_groups: Option<Vec<usize>>,
    n_block_groups: usize,
}

impl BlockPartition {
    /// Builds a partition from explicit block member lists. Members are
    /// sorted, which fixes each node's local rank.
    pub fn new(n_nodes: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidPartition("at least one block is required".into()));
        }
        let mut node_block = vec![usize::MAX; n_nodes];
        let mut node_rank = vec![usize::MAX; n_nodes];
        let mut sorted = Vec::with_capacity(blocks.len());
        for (k, mut members) in blocks.into_iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidPartition(format!("block {k} is empty")));
            }
            members.sort_unstable();
            for (rank, &i) in members.iter().enumerate() {
                if i >= n_nodes {
                    return Err(Error::NodeOutOfRange { node: i, n_nodes });
                }
                if node_block[i] != usize::MAX {
                    return Err(Error::InvalidPartition(format!("node {i} is in more than one block")));
                }
                node_block[i] = k;
                node_rank[i] = rank;
            }
            sorted.push(members);
        }
        if let Some(i) = node_block.iter().position(|&b| b == usize::MAX) {
            return Err(Error::InvalidPartition(format!("node {i} is not assigned to a block")));
        }
        Ok(Self {
            n_nodes,
            blocks: sorted,
            node_block,
            node_rank,
            node_groups: None,
            n_node_groups: 0,
            block_groups: None,
            n_block_groups: 0,
        })
    }

    /// Builds a partition from a block index per node; block indices must
    /// cover `0..K` without gaps.
    pub fn from_assignment(node_block: &[usize]) -> Result<Self> {
        let k = node_block.iter().copied().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); k];
        for (i, &b) in node_block.iter().enumerate() {
            blocks[b].push(i);
        }
        Self::new(node_block.len(), blocks)
    }

    /// `n_blocks` consecutive blocks of `size` nodes each.
    pub fn equal_blocks(n_blocks: usize, size: usize) -> Result<Self> {
        let assignment: Vec<usize> = (0..n_blocks * size).map(|i| i / size).collect();
        Self::from_assignment(&assignment)
    }

    /// Attaches a group index (in `0..M`) to every node; `M` is taken as
    /// one past the largest index.
    pub fn with_node_groups(mut self, groups: Vec<usize>) -> Result<Self> {
        if groups.len() != self.n_nodes {
            return Err(Error::InvalidPartition(format!(
                "{} node groups given for {} nodes",
                groups.len(),
                self.n_nodes
            )));
        }
        self.n_node_groups = groups.iter().copied().max().map_or(0, |m| m + 1);
        self.node_groups = Some(groups);
        Ok(self)
    }

    /// Like [`with_node_groups`](Self::with_node_groups) but with an
    /// explicit group count, so that trailing groups may be empty.
    pub fn with_node_groups_count(self, groups: Vec<usize>, count: usize) -> Result<Self> {
        if let Some(&g) = groups.iter().find(|&&g| g >= count) {
            return Err(Error::InvalidPartition(format!("node group {g} out of range for {count} groups")));
        }
        let mut me = self.with_node_groups(groups)?;
        me.n_node_groups = count;
        Ok(me)
    }

    pub fn with_block_groups(mut self, groups: Vec<usize>) -> Result<Self> {
        if groups.len() != self.blocks.len() {
            return Err(Error::InvalidPartition(format!(
                "{} block groups given for {} blocks",
                groups.len(),
                self.blocks.len()
            )));
        }
        self.n_block_groups = groups.iter().copied().max().map_or(0, |m| m + 1);
        self.block_groups = Some(groups);
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Number of between-block subgraphs, `K choose 2`.
    pub fn n_pairs(&self) -> usize {
        let k = self.blocks.len();
        k * (k - 1) / 2
    }

    pub fn block(&self, k: usize) -> &[usize] {
        &self.blocks[k]
    }

    pub fn block_size(&self, k: usize) -> usize {
        self.blocks[k].len()
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.node_block[i]
    }

    pub fn rank_of(&self, i: usize) -> usize {
        self.node_rank[i]
    }

    pub fn node_group(&self, i: usize) -> Option<usize> {
        self.node_groups.as_ref().map(|g| g[i])
    }

    pub fn has_node_groups(&self) -> bool {
        self.node_groups.is_some()
    }

    pub fn n_node_groups(&self) -> usize {
        self.n_node_groups
    }

    pub fn block_group(&self, k: usize) -> Option<usize> {
        self.block_groups.as_ref().map(|g| g[k])
    }

    pub fn has_block_groups(&self) -> bool {
        self.block_groups.is_some()
    }

    pub fn n_block_groups(&self) -> usize {
        self.n_block_groups
    }

    pub fn a_avg(&self) -> f64 {
        self.n_nodes as f64 / self.blocks.len() as f64
    }

    pub fn a_max(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of edge variables in a subgraph.
    pub fn subgraph_dim(&self, r: SubgraphRef) -> usize {
        if r.is_within() {
            let a = self.block_size(r.k);
            a * a.saturating_sub(1) / 2
        } else {
            self.block_size(r.k) * self.block_size(r.l)
        }
    }

    /// All subgraphs in lexicographic `(k, l)` order, `k <= l`.
    pub fn subgraphs(&self) -> impl Iterator<Item = SubgraphRef> + '_ {
        let n = self.blocks.len();
        (0..n).flat_map(move |k| (k..n).map(move |l| SubgraphRef { k, l }))
    }

    /// Position of `r` in [`subgraphs`](Self::subgraphs) order. Depends only
    /// on `K`, which keeps RNG streams addressed by it stable.
    pub fn subgraph_index(&self, r: SubgraphRef) -> usize {
        let n = self.blocks.len();
        r.k * n - r.k * (r.k.saturating_sub(1)) / 2 + (r.l - r.k)
    }

    /// Container holding the pair `{i, j}`.
    pub fn container_of(&self, i: usize, j: usize) -> SubgraphRef {
        let (bi, bj) = (self.node_block[i], self.node_block[j]);
        SubgraphRef { k: bi.min(bj), l: bi.max(bj) }
    }

    pub(crate) fn pair_slot(&self, k: usize, l: usize) -> usize {
        debug_assert!(k < l);
        let n = self.blocks.len();
        k * (2 * n - k - 1) / 2 + (l - k - 1)
    }

    pub fn check_ref(&self, r: SubgraphRef) -> Result<()> {
        let n = self.blocks.len();
        if r.k > r.l || r.l >= n {
            return Err(Error::InvalidSubgraph { k: r.k, l: r.l, n_blocks: n });
        }
        Ok(())
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.n_nodes {
            return Err(Error::NodeOutOfRange { node: i, n_nodes: self.n_nodes });
        }
        Ok(())
    }
}

/// A block-based subgraph: within-block when `k == l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubgraphRef {
    pub k: usize,
    pub l: usize,
}

impl SubgraphRef {
    pub fn new(k: usize, l: usize) -> Result<Self> {
        if k > l {
            return Err(Error::InvalidSubgraph { k, l, n_blocks: 0 });
        }
        Ok(Self { k, l })
    }

    pub fn within(k: usize) -> Self {
        Self { k, l: k }
    }

    pub fn is_within(&self) -> bool {
        self.k == self.l
    }
}

/// Fixed-length bit set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgeBits {
    words: Vec<u64>,
    len: usize,
}

impl EdgeBits {
    pub fn new(len: usize) -> Self {
        Self { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        (self.words[idx >> 6] >> (idx & 63)) & 1 == 1
    }

    /// Flips bit `idx`, returning its new value.
    #[inline]
    pub fn flip(&mut self, idx: usize) -> bool {
        self.words[idx >> 6] ^= 1 << (idx & 63);
        self.get(idx)
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + b)
            })
        })
    }
}

/// Lexicographic index of the local pair `(r, s)`, `r < s`, in a block of
/// `size` nodes.
#[inline]
pub fn within_pair_index(size: usize, r: usize, s: usize) -> usize {
    debug_assert!(r < s && s < size);
    r * (2 * size - r - 1) / 2 + (s - r - 1)
}

/// Edge state of one within-block subgraph.
///
/// Besides the edge bits it keeps, for every local pair, the number of
/// shared partners inside the block, plus the running count of transitive
/// edges (edges with at least one shared partner). Row bitsets make common
/// neighbourhoods a word-wise AND, so toggles cost O(size / 64 + degree).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WithinState {
    size: usize,
    bits: EdgeBits,
    words: usize,
    rows: Vec<u64>,
    edges: u64,
    partners: Vec<u32>,
    transitive: u64,
}

fn for_each_bit(words: impl Iterator<Item = u64>, mut f: impl FnMut(usize)) {
    for (wi, mut w) in words.enumerate() {
        while w != 0 {
            f(wi * 64 + w.trailing_zeros() as usize);
            w &= w - 1;
        }
    }
}

impl WithinState {
    pub fn new(size: usize) -> Self {
        let dim = size * size.saturating_sub(1) / 2;
        let words = size.div_ceil(64);
        Self {
            size,
            bits: EdgeBits::new(dim),
            words,
            rows: vec![0; words * size],
            edges: 0,
            partners: vec![0; dim],
            transitive: 0,
        }
    }

    #[inline]
    fn row(&self, r: usize) -> &[u64] {
        &self.rows[r * self.words..(r + 1) * self.words]
    }

    /// Builds the state from an edge predicate over local pairs.
    pub fn from_fn(size: usize, mut adj: impl FnMut(usize, usize) -> bool) -> Self {
        let mut st = Self::new(size);
        for r in 0..size {
            for s in r + 1..size {
                if adj(r, s) {
                    st.toggle(r, s);
                }
            }
        }
        st
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn edge_count(&self) -> u64 {
        self.edges
    }

    pub fn transitive_count(&self) -> u64 {
        self.transitive
    }

    pub fn bits(&self) -> &EdgeBits {
        &self.bits
    }

    #[inline]
    fn idx(&self, r: usize, s: usize) -> usize {
        if r < s {
            within_pair_index(self.size, r, s)
        } else {
            within_pair_index(self.size, s, r)
        }
    }

    #[inline]
    pub fn has(&self, r: usize, s: usize) -> bool {
        (self.rows[r * self.words + (s >> 6)] >> (s & 63)) & 1 == 1
    }

    /// Maintained shared-partner count of the local pair.
    #[inline]
    pub fn partners(&self, r: usize, s: usize) -> u32 {
        self.partners[self.idx(r, s)]
    }

    /// Change in the transitive-edge count if `(r, s)` were toggled.
    pub fn transitive_delta(&self, r: usize, s: usize) -> i64 {
        let present = self.has(r, s);
        let own = i64::from(self.partners(r, s) >= 1);
        // a neighbour edge gains/loses transitivity when its partner count
        // crosses between 0 and 1
        let threshold = u32::from(present);
        let mut d = own;
        let common = self.row(r).iter().zip(self.row(s)).map(|(a, b)| a & b);
        for_each_bit(common, |h| {
            d += i64::from(self.partners(s, h) == threshold);
            d += i64::from(self.partners(r, h) == threshold);
        });
        if present {
            -d
        } else {
            d
        }
    }

    /// Flips `(r, s)` and returns the new bit value.
    pub fn toggle(&mut self, r: usize, s: usize) -> bool {
        debug_assert!(r != s);
        let delta_t = self.transitive_delta(r, s);
        let idx = self.idx(r, s);
        let now = self.bits.flip(idx);
        if now {
            self.edges += 1;
        } else {
            self.edges -= 1;
        }
        self.transitive = (self.transitive as i64 + delta_t) as u64;
        self.rows[r * self.words + (s >> 6)] ^= 1 << (s & 63);
        self.rows[s * self.words + (r >> 6)] ^= 1 << (r & 63);
        let step: i32 = if now { 1 } else { -1 };
        let (size, words) = (self.size, self.words);
        let bump = |partners: &mut [u32], a: usize, b: usize| {
            let p = if a < b { within_pair_index(size, a, b) } else { within_pair_index(size, b, a) };
            partners[p] = (partners[p] as i32 + step) as u32;
        };
        // neighbours of r gain or lose s as a partner, and vice versa
        let (rows, partners) = (&self.rows, &mut self.partners);
        for_each_bit(rows[r * words..(r + 1) * words].iter().copied(), |h| {
            if h != s {
                bump(partners, s, h);
            }
        });
        for_each_bit(rows[s * words..(s + 1) * words].iter().copied(), |h| {
            if h != r {
                bump(partners, r, h);
            }
        });
        now
    }

    /// Local pairs `(r, s)`, `r < s`, that carry an edge.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edges as usize);
        for r in 0..self.size {
            for s in r + 1..self.size {
                if self.bits.get(within_pair_index(self.size, r, s)) {
                    out.push((r, s));
                }
            }
        }
        out
    }
}

/// Edge state of one between-block subgraph, addressed row-major by
/// (rank in block k, rank in block l).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BetweenState {
    rows: usize,
    cols: usize,
    bits: EdgeBits,
    edges: u64,
}

impl BetweenState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, bits: EdgeBits::new(rows * cols), edges: 0 }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn edge_count(&self) -> u64 {
        self.edges
    }

    pub fn bits(&self) -> &EdgeBits {
        &self.bits
    }

    #[inline]
    pub fn has(&self, r: usize, c: usize) -> bool {
        self.bits.get(r * self.cols + c)
    }

    pub fn toggle(&mut self, r: usize, c: usize) -> bool {
        let now = self.bits.flip(r * self.cols + c);
        if now {
            self.edges += 1;
        } else {
            self.edges -= 1;
        }
        now
    }
}

/// State of any single subgraph container.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubgraphState {
    Within(WithinState),
    Between(BetweenState),
}

impl SubgraphState {
    pub fn dim(&self) -> usize {
        match self {
            SubgraphState::Within(w) => w.dim(),
            SubgraphState::Between(b) => b.dim(),
        }
    }

    pub fn edge_count(&self) -> u64 {
        match self {
            SubgraphState::Within(w) => w.edge_count(),
            SubgraphState::Between(b) => b.edge_count(),
        }
    }
}

/// Binary symmetric graph stored per block-based subgraph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalGraph {
    partition: Arc<BlockPartition>,
    within: Vec<WithinState>,
    between: Vec<BetweenState>,
}

impl LocalGraph {
    /// The empty graph on `partition`.
    pub fn new(partition: Arc<BlockPartition>) -> Self {
        let k = partition.n_blocks();
        let within = (0..k).map(|b| WithinState::new(partition.block_size(b))).collect();
        let mut between = Vec::with_capacity(partition.n_pairs());
        for a in 0..k {
            for b in a + 1..k {
                between.push(BetweenState::new(partition.block_size(a), partition.block_size(b)));
            }
        }
        Self { partition, within, between }
    }

    /// Builds a graph from 0-based node pairs; duplicates (in either
    /// orientation) and self-loops are rejected.
    pub fn from_edges(partition: Arc<BlockPartition>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::new(partition);
        for &(i, j) in edges {
            if g.has_edge(i, j)? {
                return Err(Error::InvalidPartition(format!("duplicate edge ({i}, {j})")));
            }
            g.toggle_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn partition_arc(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        self.partition.check_node(i)?;
        self.partition.check_node(j)?;
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        Ok(())
    }

    pub fn has_edge(&self, i: usize, j: usize) -> Result<bool> {
        self.check_pair(i, j)?;
        Ok(self.edge_unchecked(i, j))
    }

    fn edge_unchecked(&self, i: usize, j: usize) -> bool {
        let p = &*self.partition;
        let (bi, bj) = (p.block_of(i), p.block_of(j));
        let (ri, rj) = (p.rank_of(i), p.rank_of(j));
        if bi == bj {
            self.within[bi].has(ri, rj)
        } else if bi < bj {
            self.between[p.pair_slot(bi, bj)].has(ri, rj)
        } else {
            self.between[p.pair_slot(bj, bi)].has(rj, ri)
        }
    }

    /// Flips `X_{i,j}` and returns the new value.
    pub fn toggle_edge(&mut self, i: usize, j: usize) -> Result<bool> {
        self.check_pair(i, j)?;
        let p = &*self.partition;
        let (bi, bj) = (p.block_of(i), p.block_of(j));
        let (ri, rj) = (p.rank_of(i), p.rank_of(j));
        Ok(if bi == bj {
            self.within[bi].toggle(ri, rj)
        } else if bi < bj {
            let slot = p.pair_slot(bi, bj);
            self.between[slot].toggle(ri, rj)
        } else {
            let slot = p.pair_slot(bj, bi);
            self.between[slot].toggle(rj, ri)
        })
    }

    /// `|{h in A_k \ {i, j} : X_{i,h} = X_{j,h} = 1}|`, counted directly
    /// from the edge bits.
    pub fn common_within_neighbors(&self, i: usize, j: usize) -> Result<usize> {
        self.check_pair(i, j)?;
        let p = &*self.partition;
        let k = p.block_of(i);
        if p.block_of(j) != k {
            return Err(Error::DifferentBlocks { i, j });
        }
        let st = &self.within[k];
        let (ri, rj) = (p.rank_of(i), p.rank_of(j));
        Ok((0..st.size()).filter(|&h| h != ri && h != rj && st.has(ri, h) && st.has(rj, h)).count())
    }

    pub fn within(&self, k: usize) -> &WithinState {
        &self.within[k]
    }

    pub fn between(&self, k: usize, l: usize) -> &BetweenState {
        &self.between[self.partition.pair_slot(k, l)]
    }

    pub fn subgraph_state(&self, r: SubgraphRef) -> Result<SubgraphState> {
        self.partition.check_ref(r)?;
        Ok(if r.is_within() {
            SubgraphState::Within(self.within[r.k].clone())
        } else {
            SubgraphState::Between(self.between(r.k, r.l).clone())
        })
    }

    /// Replaces one container. The state's shape must match the partition.
    pub fn set_subgraph(&mut self, r: SubgraphRef, state: SubgraphState) -> Result<()> {
        self.partition.check_ref(r)?;
        match state {
            SubgraphState::Within(w) if r.is_within() && w.size() == self.partition.block_size(r.k) => {
                self.within[r.k] = w;
            }
            SubgraphState::Between(b)
                if !r.is_within()
                    && b.rows() == self.partition.block_size(r.k)
                    && b.cols() == self.partition.block_size(r.l) =>
            {
                let slot = self.partition.pair_slot(r.k, r.l);
                self.between[slot] = b;
            }
            _ => return Err(Error::Dimension(format!("state shape does not fit subgraph ({}, {})", r.k, r.l))),
        }
        Ok(())
    }

    pub fn subgraph_edge_count(&self, r: SubgraphRef) -> Result<u64> {
        self.partition.check_ref(r)?;
        Ok(if r.is_within() { self.within[r.k].edge_count() } else { self.between(r.k, r.l).edge_count() })
    }

    pub fn edge_count(&self) -> u64 {
        self.within.iter().map(WithinState::edge_count).sum::<u64>()
            + self.between.iter().map(BetweenState::edge_count).sum::<u64>()
    }

    /// All edges as 0-based `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let p = &*self.partition;
        let mut out = Vec::with_capacity(self.edge_count() as usize);
        for (k, st) in self.within.iter().enumerate() {
            let members = p.block(k);
            for (r, s) in st.edges() {
                out.push((members[r], members[s]));
            }
        }
        for k in 0..p.n_blocks() {
            for l in k + 1..p.n_blocks() {
                let st = self.between(k, l);
                let (mk, ml) = (p.block(k), p.block(l));
                for idx in st.bits().ones() {
                    let (r, c) = (idx / st.cols(), idx % st.cols());
                    let (a, b) = (mk[r], ml[c]);
                    out.push((a.min(b), a.max(b)));
                }
            }
        }
        out.sort_unstable();
        out
    }
}
