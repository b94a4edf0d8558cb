//! Sparse directed graphs, random generators, degree statistics and the
//! dependency-pair machinery behind the variance estimator.
//!
//! An edge `(target, source)` is the directed link `source → target`: the
//! period-0 outcome of `source` can move the period-1 outcome of `target`.
//! `in_adj[i]` is N(i), the in-neighbours of `i`; `out_adj[j]` is Nᴼ(j).

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::rng::{self, domain};
use crate::{Error, Result};

/// Directed graph without self-loops or duplicate edges. Adjacency lists are
/// sorted, and `out_adj` is always the exact transpose of `in_adj`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectedGraph {
    n: usize,
    in_adj: Vec<Vec<usize>>,
    out_adj: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub n: usize,
    /// Largest in- or out-degree over all nodes.
    pub max_deg: usize,
    /// Mean in-degree (equal to the mean out-degree, |E|/n).
    pub avg_deg: f64,
    /// Median in-degree.
    pub median_deg: f64,
    /// `1 ∨ max_i (|N(i)| ∨ |Nᴼ(i)|)`.
    pub d_mx: f64,
    /// `1 ∨ max(mean in-degree, mean out-degree)`.
    pub d_av: f64,
}

impl DirectedGraph {
    /// The graph on `n` nodes without edges.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            in_adj: vec![Vec::new(); n],
            out_adj: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from `(target, source)` pairs. Duplicates are merged.
    pub fn from_edge_list(edges: &[(usize, usize)], n: usize) -> Result<Self> {
        let mut in_adj = vec![Vec::new(); n];
        for &(target, source) in edges {
            for index in [target, source] {
                if index >= n {
                    return Err(Error::IndexOutOfRange { index, n });
                }
            }
            if target == source {
                return Err(Error::SelfLoop { node: target });
            }
            in_adj[target].push(source);
        }
        Ok(Self::from_in_adjacency(in_adj))
    }

    /// Builds from in-neighbour lists that are already validated (in range, no
    /// self-loops); lists are sorted and deduplicated here.
    fn from_in_adjacency(mut in_adj: Vec<Vec<usize>>) -> Self {
        let n = in_adj.len();
        let mut out_adj = vec![Vec::new(); n];
        for (target, list) in in_adj.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            for &source in list.iter() {
                out_adj[source].push(target);
            }
        }
        Self { n, in_adj, out_adj }
    }

    /// Directed Erdős–Rényi graph: every ordered pair `(i, j)`, `i ≠ j`, is an
    /// edge independently with probability `lambda / (n - 1)`.
    pub fn erdos_renyi(n: usize, lambda: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize {
                n,
                reason: "Erdős–Rényi graph needs at least 2 nodes",
            });
        }
        let p = lambda / (n - 1) as f64;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability { p });
        }
        let mut in_adj = vec![Vec::new(); n];
        if p > 0.0 {
            let mut rng = rng::stream(seed, domain::GRAPH, 0);
            for (target, list) in in_adj.iter_mut().enumerate() {
                for source in 0..n {
                    if source != target && rng::uniform(&mut rng) < p {
                        list.push(source);
                    }
                }
            }
        }
        Ok(Self::from_in_adjacency(in_adj))
    }

    /// Barabási–Albert growth from a symmetrized Erdős–Rényi seed graph on 20
    /// nodes with λ = 1. Each new vertex attaches to `m` distinct existing
    /// vertices drawn with probability proportional to their current total
    /// degree (degree-0 vertices get weight 1), and every attachment is stored
    /// in both directions.
    pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Result<Self> {
        const SEED_SIZE: usize = 20;
        if n <= SEED_SIZE {
            return Err(Error::InvalidSize {
                n,
                reason: "Barabási–Albert graph needs more than 20 nodes",
            });
        }
        if m == 0 || m > SEED_SIZE {
            return Err(Error::InvalidSize {
                n: m,
                reason: "edges per new vertex must lie in 1..=20",
            });
        }
        let seed_graph = Self::erdos_renyi(SEED_SIZE, 1.0, rng::derive_seed(seed, 1))?;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, list) in seed_graph.in_adj.iter().enumerate() {
            for &j in list {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for list in adj.iter_mut().take(SEED_SIZE) {
            list.sort_unstable();
            list.dedup();
        }
        // Symmetric storage: in-degree = out-degree, total = 2 * |adj|.
        let mut weight: Vec<f64> = adj
            .iter()
            .take(SEED_SIZE)
            .map(|l| (2 * l.len()).max(1) as f64)
            .collect();
        let mut rng = rng::stream(seed, domain::GRAPH, 2);
        let mut chosen = Vec::with_capacity(m);
        for v in SEED_SIZE..n {
            let total: f64 = weight.iter().sum();
            chosen.clear();
            while chosen.len() < m {
                let mut u = rng::uniform(&mut rng) * total;
                let mut pick = v - 1;
                for (k, &w) in weight.iter().enumerate() {
                    if u < w {
                        pick = k;
                        break;
                    }
                    u -= w;
                }
                if !chosen.contains(&pick) {
                    chosen.push(pick);
                }
            }
            for &k in &chosen {
                adj[v].push(k);
                adj[k].push(v);
                weight[k] = (2 * adj[k].len()) as f64;
            }
            weight.push((2 * adj[v].len()).max(1) as f64);
        }
        Ok(Self::from_in_adjacency(adj))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.in_adj.iter().map(Vec::len).sum()
    }

    /// N(i): nodes whose period-0 outcome feeds node `i`.
    #[inline]
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_adj[i]
    }

    /// Nᴼ(j): nodes whose period-1 outcome node `j` feeds.
    #[inline]
    pub fn out_neighbors(&self, j: usize) -> &[usize] {
        &self.out_adj[j]
    }

    #[inline]
    pub fn in_degree(&self, i: usize) -> usize {
        self.in_adj[i].len()
    }

    pub fn has_edge(&self, target: usize, source: usize) -> bool {
        self.in_adj[target].binary_search(&source).is_ok()
    }

    /// `(target, source)` pairs in target-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.in_adj
            .iter()
            .enumerate()
            .flat_map(|(t, l)| l.iter().map(move |&s| (t, s)))
    }

    /// Every edge reversed.
    pub fn transpose(&self) -> Self {
        Self {
            n: self.n,
            in_adj: self.out_adj.clone(),
            out_adj: self.in_adj.clone(),
        }
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: perm.len(),
            });
        }
        let edges: Vec<(usize, usize)> = self.edges().map(|(t, s)| (perm[t], perm[s])).collect();
        Self::from_edge_list(&edges, self.n)
    }

    /// Keeps each edge independently with probability `keep`.
    pub fn thin(&self, keep: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&keep) {
            return Err(Error::InvalidProbability { p: keep });
        }
        let mut rng = rng::stream(seed, domain::PROXY, 0);
        let in_adj = self
            .in_adj
            .iter()
            .map(|l| {
                l.iter()
                    .copied()
                    .filter(|_| rng::uniform(&mut rng) < keep)
                    .collect()
            })
            .collect();
        Ok(Self::from_in_adjacency(in_adj))
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let n = self.n;
        let edges = self.edge_count();
        let max_deg = (0..n)
            .map(|i| self.in_adj[i].len().max(self.out_adj[i].len()))
            .max()
            .unwrap_or(0);
        let mean = if n == 0 { 0.0 } else { edges as f64 / n as f64 };
        let mut ins: Vec<usize> = self.in_adj.iter().map(Vec::len).collect();
        ins.sort_unstable();
        let median_deg = match n {
            0 => 0.0,
            _ if n % 2 == 1 => ins[n / 2] as f64,
            _ => 0.5 * (ins[n / 2 - 1] + ins[n / 2]) as f64,
        };
        DegreeStats {
            n,
            max_deg,
            avg_deg: mean,
            median_deg,
            d_mx: (max_deg as f64).max(1.0),
            // Mean in-degree and mean out-degree both equal |E|/n.
            d_av: mean.max(1.0),
        }
    }

    /// Ȳᵢ = mean of `y` over N(i), with Ȳᵢ = 0 for nodes without in-neighbours.
    pub fn neighborhood_average(&self, y: &[u8]) -> Result<Vec<f64>> {
        if y.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: y.len(),
            });
        }
        Ok(self
            .in_adj
            .iter()
            .map(|l| {
                if l.is_empty() {
                    0.0
                } else {
                    l.iter().map(|&j| y[j] as u32).sum::<u32>() as f64 / l.len() as f64
                }
            })
            .collect())
    }

    /// Unordered pairs `{i1, i2}` (diagonal included) whose closed
    /// in-neighbourhoods N̄(i1), N̄(i2) intersect.
    ///
    /// Two closed neighbourhoods share a node `k` exactly when both nodes lie
    /// in R(k) = {k} ∪ Nᴼ(k), so the pairs are collected group by group and
    /// deduplicated. Cost is Σₖ |R(k)|².
    pub fn overlap_pairs(&self) -> OverlapPairs {
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        let mut group: Vec<usize> = Vec::new();
        for k in 0..self.n {
            group.clear();
            group.push(k);
            group.extend_from_slice(&self.out_adj[k]);
            group.sort_unstable();
            for (a, &i1) in group.iter().enumerate() {
                for &i2 in &group[a..] {
                    pairs.push((i1 as u32, i2 as u32));
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        OverlapPairs { n: self.n, pairs }
    }

    /// Underlying undirected graph (an edge in either direction).
    pub fn symmetrized(&self) -> UndirectedGraph {
        let adj = (0..self.n)
            .map(|i| {
                let mut l: Vec<usize> = self.in_adj[i]
                    .iter()
                    .chain(self.out_adj[i].iter())
                    .copied()
                    .collect();
                l.sort_unstable();
                l.dedup();
                l
            })
            .collect();
        UndirectedGraph { adj }
    }
}

/// The dependency pairs of a graph: `(i1, i2)` with `i1 ≤ i2`, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapPairs {
    n: usize,
    pairs: Vec<(u32, u32)>,
}

impl OverlapPairs {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().map(|&(a, b)| (a as usize, b as usize))
    }

    /// Σ over ordered overlapping pairs of z[i1]·z[i2], diagonal included:
    /// each off-diagonal unordered pair counts twice.
    pub fn quadratic_form(&self, z: &[f64]) -> f64 {
        let mut acc = crate::sum::KahanSum::new();
        for &(a, b) in &self.pairs {
            let (a, b) = (a as usize, b as usize);
            let t = z[a] * z[b];
            acc.add(if a == b { t } else { 2.0 * t });
        }
        acc.value()
    }

    /// G*: nodes joined when their closed in-neighbourhoods intersect.
    pub fn dependency_graph(&self) -> UndirectedGraph {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.pairs {
            if a != b {
                adj[a as usize].push(b as usize);
                adj[b as usize].push(a as usize);
            }
        }
        UndirectedGraph { adj }
    }
}

/// Undirected graph as symmetric adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    adj: Vec<Vec<usize>>,
}

impl UndirectedGraph {
    /// From unordered edges; loops and duplicates are dropped.
    pub fn from_edges(edges: &[(usize, usize)], n: usize) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            for index in [a, b] {
                if index >= n {
                    return Err(Error::IndexOutOfRange { index, n });
                }
            }
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        Ok(Self { adj })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Greedy colouring in node order: each node takes the smallest class not
/// used by an already coloured neighbour. Returns the classes, so no class
/// holds two adjacent nodes and there are at most `1 + max_degree` of them.
pub fn greedy_partition(g: &UndirectedGraph) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut color = vec![usize::MAX; n];
    let mut used: Vec<bool> = Vec::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        used.clear();
        used.resize(classes.len() + 1, false);
        for &u in g.neighbors(v) {
            if color[u] != usize::MAX && color[u] < used.len() {
                used[color[u]] = true;
            }
        }
        let c = used.iter().position(|&b| !b).unwrap_or(classes.len());
        if c == classes.len() {
            classes.push(Vec::new());
        }
        color[v] = c;
        classes[c].push(v);
    }
    classes
}
