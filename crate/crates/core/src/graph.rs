//! Networks the virus spreads on.
//!
//! A [`Network`] stores, for every host `i`, the hosts `j` that can directly
//! infect it (`a_ij = 1`). Undirected networks keep the relation symmetric.
//! Networks are immutable once built and are shared freely between workers.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

/// Attempts allowed to produce a simple realization of a sampled degree sequence.
pub const SCALE_FREE_RETRY_BUDGET: usize = 1000;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
    #[error("no simple realization found after {attempts} attempts")]
    NoRealization { attempts: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("edge list contains no edges")]
    EmptyEdgeSet,
    #[error("network invariant violated: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where a network came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    ScaleFree { edges: usize, exponent: f64, seed: u64 },
    SmallWorld { k: usize, rewire_prob: f64, seed: u64 },
    Loaded { self_loops_dropped: usize, duplicates_collapsed: usize },
    /// Built from an explicit edge list (fixtures, tests).
    Explicit,
}

impl Provenance {
    pub fn kind(&self) -> &'static str {
        match self {
            Provenance::ScaleFree { .. } => "scale-free",
            Provenance::SmallWorld { .. } => "small-world",
            Provenance::Loaded { .. } => "loaded",
            Provenance::Explicit => "explicit",
        }
    }

    fn header_fields(&self) -> Vec<(&'static str, String)> {
        match self {
            Provenance::ScaleFree { edges, exponent, seed } => vec![
                ("target_edges", edges.to_string()),
                ("exponent", exponent.to_string()),
                ("seed", seed.to_string()),
            ],
            Provenance::SmallWorld { k, rewire_prob, seed } => vec![
                ("k", k.to_string()),
                ("rewire_prob", rewire_prob.to_string()),
                ("seed", seed.to_string()),
            ],
            Provenance::Loaded { self_loops_dropped, duplicates_collapsed } => vec![
                ("self_loops_dropped", self_loops_dropped.to_string()),
                ("duplicates_collapsed", duplicates_collapsed.to_string()),
            ],
            Provenance::Explicit => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n: usize,
    in_neighbors: Vec<Vec<usize>>,
    out_neighbors: Vec<Vec<usize>>,
    directed: bool,
    meta: Provenance,
}

impl Network {
    /// Builds a network from `(source, target)` pairs.
    ///
    /// For directed networks the pair `(j, i)` means host `j` can infect host `i`.
    /// Duplicates are collapsed; self-loops and out-of-range indices are rejected.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize)],
        directed: bool,
        meta: Provenance,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Invalid("network must have at least one node".into()));
        }
        let mut incoming = vec![BTreeSet::new(); n];
        let mut outgoing = vec![BTreeSet::new(); n];
        for &(j, i) in edges {
            if j >= n || i >= n {
                return Err(GraphError::Invalid(format!("edge ({j}, {i}) out of range for n = {n}")));
            }
            if j == i {
                return Err(GraphError::Invalid(format!("self-loop at node {i}")));
            }
            incoming[i].insert(j);
            outgoing[j].insert(i);
            if !directed {
                incoming[j].insert(i);
                outgoing[i].insert(j);
            }
        }
        Ok(Self {
            n,
            in_neighbors: incoming.into_iter().map(|s| s.into_iter().collect()).collect(),
            out_neighbors: outgoing.into_iter().map(|s| s.into_iter().collect()).collect(),
            directed,
            meta,
        })
    }

    /// `n` hosts and no edges.
    pub fn empty(n: usize) -> Self {
        Self::from_edges(n, &[], false, Provenance::Explicit).expect("empty network is valid")
    }

    /// Undirected path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges, false, Provenance::Explicit).expect("path is valid")
    }

    /// Undirected star with hub 0 and `n - 1` leaves.
    pub fn star(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::from_edges(n, &edges, false, Provenance::Explicit).expect("star is valid")
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn meta(&self) -> &Provenance {
        &self.meta
    }

    /// Hosts that can directly infect host `i`.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    /// Hosts that host `j` can directly infect.
    pub fn out_neighbors(&self, j: usize) -> &[usize] {
        &self.out_neighbors[j]
    }

    pub fn edge_count(&self) -> usize {
        let arcs: usize = self.in_neighbors.iter().map(Vec::len).sum();
        if self.directed {
            arcs
        } else {
            arcs / 2
        }
    }

    /// Edges in canonical order: `(u, v)` with `u < v` when undirected,
    /// `(source, target)` when directed.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (j, targets) in self.out_neighbors.iter().enumerate() {
            for &i in targets {
                if self.directed || j < i {
                    out.push((j, i));
                }
            }
        }
        out
    }

    pub fn degree(&self, i: usize) -> usize {
        if self.directed {
            self.in_neighbors[i].len() + self.out_neighbors[i].len()
        } else {
            self.in_neighbors[i].len()
        }
    }

    pub fn is_connected(&self) -> bool {
        component_labels(&self.undirected_adjacency()).1 == 1
    }

    fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| {
                let mut nb: Vec<usize> = self.in_neighbors[i]
                    .iter()
                    .chain(self.out_neighbors[i].iter())
                    .copied()
                    .collect();
                nb.sort_unstable();
                nb.dedup();
                nb
            })
            .collect()
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.in_neighbors.len() != self.n || self.out_neighbors.len() != self.n {
            return Err(GraphError::Invalid("adjacency length differs from n".into()));
        }
        for i in 0..self.n {
            for (label, list) in [("in", &self.in_neighbors[i]), ("out", &self.out_neighbors[i])] {
                if list.iter().any(|&j| j >= self.n) {
                    return Err(GraphError::Invalid(format!("{label}-neighbor of {i} out of range")));
                }
                if list.contains(&i) {
                    return Err(GraphError::Invalid(format!("self-loop at node {i}")));
                }
                if list.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(GraphError::Invalid(format!("{label}-neighbors of {i} unsorted or duplicated")));
                }
            }
            for &j in &self.in_neighbors[i] {
                if self.out_neighbors[j].binary_search(&i).is_err() {
                    return Err(GraphError::Invalid(format!("arc {j}->{i} missing from out-list")));
                }
                if !self.directed && self.in_neighbors[j].binary_search(&i).is_err() {
                    return Err(GraphError::Invalid(format!("asymmetric undirected edge {j}-{i}")));
                }
            }
        }
        let arcs_in: usize = self.in_neighbors.iter().map(Vec::len).sum();
        let arcs_out: usize = self.out_neighbors.iter().map(Vec::len).sum();
        if arcs_in != arcs_out {
            return Err(GraphError::Invalid("in/out arc counts differ".into()));
        }
        Ok(())
    }

    /// Writes the SNAP-compatible edge list with a `#` header carrying the provenance.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# virus-damage network")?;
        writeln!(w, "# kind: {}", self.meta.kind())?;
        writeln!(w, "# nodes: {}", self.n)?;
        writeln!(w, "# edges: {}", self.edge_count())?;
        writeln!(w, "# directed: {}", self.directed)?;
        for (key, value) in self.meta.header_fields() {
            writeln!(w, "# {key}: {value}")?;
        }
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }
}

/// Summary of a network's degree distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub mean_degree: f64,
    pub max_degree: usize,
    pub degree_variance: f64,
    /// Discrete power-law maximum-likelihood exponent over degrees >= 2.
    pub estimated_power_exponent: Option<f64>,
}

impl fmt::Display for DegreeStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mean_degree={:.4} max_degree={} degree_variance={:.4} power_exponent=",
            self.mean_degree, self.max_degree, self.degree_variance
        )?;
        match self.estimated_power_exponent {
            Some(e) => write!(f, "{e:.4}"),
            None => write!(f, "n/a"),
        }
    }
}

pub fn degree_stats(net: &Network) -> DegreeStats {
    let degrees: Vec<usize> = (0..net.node_count()).map(|i| net.degree(i)).collect();
    let n = degrees.len() as f64;
    let mean = degrees.iter().sum::<usize>() as f64 / n;
    let variance = degrees.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / n;

    const K_MIN: f64 = 2.0;
    let tail: Vec<f64> = degrees.iter().filter(|&&d| d >= 2).map(|&d| d as f64).collect();
    let log_sum: f64 = tail.iter().map(|k| (k / (K_MIN - 0.5)).ln()).sum();
    let estimated_power_exponent = (!tail.is_empty()).then(|| 1.0 + tail.len() as f64 / log_sum);

    DegreeStats {
        mean_degree: mean,
        max_degree: degrees.iter().copied().max().unwrap_or(0),
        degree_variance: variance,
        estimated_power_exponent,
    }
}

/// Connected simple network with a power-law-shaped degree sequence.
///
/// Degrees are drawn from `P(k) ∝ k^-exponent` on `[1, n-1]`, nudged one unit
/// at a time (random hosts) until they sum to `2 * edges`, and realized by a
/// configuration model that rejects partners which would create a self-loop
/// or multi-edge. Leftover components are then joined by degree-preserving
/// edge swaps, so the degree sequence and edge count are exact.
pub fn generate_scale_free(n: usize, edges: usize, exponent: f64, seed: u64) -> Result<Network, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidParameter(format!("scale-free needs n >= 2, got {n}")));
    }
    if !(exponent > 2.0) || !exponent.is_finite() {
        return Err(GraphError::InvalidParameter(format!("power exponent must exceed 2, got {exponent}")));
    }
    if edges < n - 1 {
        return Err(GraphError::InvalidParameter(format!(
            "{edges} edges cannot connect {n} nodes (need at least {})",
            n - 1
        )));
    }
    if edges > n * (n - 1) / 2 {
        return Err(GraphError::InvalidParameter(format!("{edges} edges exceed the simple-graph maximum for n = {n}")));
    }

    let mut rng = seed::rng_from(seed);
    let weights: Vec<f64> = (1..n).map(|k| (k as f64).powf(-exponent)).collect();
    let law = WeightedIndex::new(&weights).expect("power-law weights are positive");

    for _ in 0..SCALE_FREE_RETRY_BUDGET {
        let degrees = sample_degree_sequence(n, 2 * edges, &law, &mut rng);
        let Some(mut adj) = pair_stubs(&degrees, &mut rng) else {
            continue;
        };
        join_components(&mut adj, &mut rng);
        let list: Vec<(usize, usize)> = adj
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| nb.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
            .collect();
        return Network::from_edges(n, &list, false, Provenance::ScaleFree { edges, exponent, seed });
    }
    Err(GraphError::NoRealization { attempts: SCALE_FREE_RETRY_BUDGET })
}

fn sample_degree_sequence<R: Rng>(n: usize, total: usize, law: &WeightedIndex<f64>, rng: &mut R) -> Vec<usize> {
    let mut degrees: Vec<usize> = (0..n).map(|_| law.sample(rng) + 1).collect();
    let mut sum: usize = degrees.iter().sum();
    while sum < total {
        let i = rng.gen_range(0..n);
        if degrees[i] < n - 1 {
            degrees[i] += 1;
            sum += 1;
        }
    }
    while sum > total {
        let i = rng.gen_range(0..n);
        if degrees[i] > 1 {
            degrees[i] -= 1;
            sum -= 1;
        }
    }
    degrees
}

/// Random stub matching; a stub's partner is drawn among the remaining stubs
/// that keep the graph simple. `None` if a stub is left with no valid partner.
fn pair_stubs<R: Rng>(degrees: &[usize], rng: &mut R) -> Option<Vec<BTreeSet<usize>>> {
    let mut stubs: Vec<usize> = degrees
        .iter()
        .enumerate()
        .flat_map(|(node, &d)| std::iter::repeat_n(node, d))
        .collect();
    stubs.shuffle(rng);
    let mut adj = vec![BTreeSet::new(); degrees.len()];
    let mut candidates = Vec::with_capacity(stubs.len());
    while let Some(u) = stubs.pop() {
        candidates.clear();
        candidates.extend((0..stubs.len()).filter(|&idx| stubs[idx] != u && !adj[u].contains(&stubs[idx])));
        let &idx = candidates.choose(rng)?;
        let v = stubs.swap_remove(idx);
        adj[u].insert(v);
        adj[v].insert(u);
    }
    Some(adj)
}

/// Labels each node with its component index; returns `(labels, count)`.
fn component_labels<A: AsRef<[usize]>>(adj: &[A]) -> (Vec<usize>, usize) {
    let mut label = vec![usize::MAX; adj.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..adj.len() {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = count;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in adj[u].as_ref() {
                if label[v] == usize::MAX {
                    label[v] = count;
                    queue.push_back(v);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

fn reachable_without(adj: &[BTreeSet<usize>], from: usize, to: usize, skip: (usize, usize)) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(u) = stack.pop() {
        if u == to {
            return true;
        }
        for &v in &adj[u] {
            if (u, v) == skip || (v, u) == skip || seen[v] {
                continue;
            }
            seen[v] = true;
            stack.push(v);
        }
    }
    false
}

/// Merges components with swaps `(u,v),(x,y) -> (u,x),(v,y)`, where `u-v` lies on a
/// cycle of one component and `x-y` is any edge of another. Degrees are preserved
/// and each swap removes one component. Requires every node to have degree >= 1.
fn join_components<R: Rng>(adj: &mut [BTreeSet<usize>], rng: &mut R) {
    loop {
        let (label, count) = {
            let lists: Vec<Vec<usize>> = adj.iter().map(|s| s.iter().copied().collect()).collect();
            component_labels(&lists)
        };
        if count <= 1 {
            return;
        }
        let mut cycle_edges = Vec::new();
        for u in 0..adj.len() {
            for &v in &adj[u] {
                if u < v && reachable_without(adj, u, v, (u, v)) {
                    cycle_edges.push((u, v));
                }
            }
        }
        let &(u, v) = cycle_edges
            .choose(rng)
            .expect("a disconnected graph with edges >= n - 1 always has a cycle");
        let others: Vec<(usize, usize)> = (0..adj.len())
            .filter(|&x| label[x] != label[u])
            .flat_map(|x| adj[x].iter().filter(move |&&y| x < y).map(move |&y| (x, y)))
            .collect();
        let &(x, y) = others.choose(rng).expect("every component has an edge");
        adj[u].remove(&v);
        adj[v].remove(&u);
        adj[x].remove(&y);
        adj[y].remove(&x);
        adj[u].insert(x);
        adj[x].insert(u);
        adj[v].insert(y);
        adj[y].insert(v);
    }
}

/// Watts–Strogatz small-world network.
///
/// Starts from a ring where every host links to its `k` nearest neighbours,
/// then rewires the far end of each lattice edge with probability
/// `rewire_prob`, avoiding self-loops and duplicates. The edge count stays `n*k/2`.
pub fn generate_small_world(n: usize, k: usize, rewire_prob: f64, seed: u64) -> Result<Network, GraphError> {
    if !k.is_multiple_of(2) {
        return Err(GraphError::InvalidParameter(format!("k must be even, got {k}")));
    }
    if k < 2 || n <= k {
        return Err(GraphError::InvalidParameter(format!("need n > k >= 2, got n = {n}, k = {k}")));
    }
    if !(0.0..=1.0).contains(&rewire_prob) {
        return Err(GraphError::InvalidParameter(format!("rewire_prob must lie in [0, 1], got {rewire_prob}")));
    }

    let mut rng = seed::rng_from(seed);
    let mut adj = vec![BTreeSet::new(); n];
    for u in 0..n {
        for offset in 1..=k / 2 {
            let v = (u + offset) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for offset in 1..=k / 2 {
        for u in 0..n {
            let v = (u + offset) % n;
            if !rng.gen_bool(rewire_prob) || !adj[u].contains(&v) {
                continue;
            }
            if adj[u].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.gen_range(0..n);
                if w != u && !adj[u].contains(&w) {
                    break w;
                }
            };
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    let list: Vec<(usize, usize)> = adj
        .iter()
        .enumerate()
        .flat_map(|(u, nb)| nb.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
        .collect();
    Network::from_edges(n, &list, false, Provenance::SmallWorld { k, rewire_prob, seed })
}

/// Reads a SNAP-style edge list.
///
/// Labels are arbitrary integers, re-indexed densely in ascending label order.
/// Duplicates collapse and self-loops are dropped (both counted in the
/// provenance). In directed mode the line `j i` means host `j` can infect host `i`.
pub fn load_edge_list<R: BufRead>(source: R, directed: bool) -> Result<Network, GraphError> {
    let mut raw = Vec::new();
    let mut labels = BTreeSet::new();
    let mut self_loops = 0;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(GraphError::Parse {
                line: line_no,
                message: format!("expected two integer tokens, found {}", tokens.len()),
            });
        }
        let parse = |tok: &str| {
            tok.parse::<i64>().map_err(|_| GraphError::Parse {
                line: line_no,
                message: format!("non-integer token {tok:?}"),
            })
        };
        let (a, b) = (parse(tokens[0])?, parse(tokens[1])?);
        labels.insert(a);
        labels.insert(b);
        if a == b {
            self_loops += 1;
        } else {
            raw.push((a, b));
        }
    }
    if raw.is_empty() {
        return Err(GraphError::EmptyEdgeSet);
    }

    let index: BTreeMap<i64, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut distinct = BTreeSet::new();
    for &(a, b) in &raw {
        let (u, v) = (index[&a], index[&b]);
        distinct.insert(if directed { (u, v) } else { (u.min(v), u.max(v)) });
    }
    let edges: Vec<(usize, usize)> = distinct.into_iter().collect();
    let meta = Provenance::Loaded {
        self_loops_dropped: self_loops,
        duplicates_collapsed: raw.len() - edges.len(),
    };
    Network::from_edges(labels.len(), &edges, directed, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_scale_free_is_a_single_edge() {
        let net = generate_scale_free(2, 1, 2.7, 3).unwrap();
        assert_eq!(net.node_count(), 2);
        assert_eq!(net.edges(), vec![(0, 1)]);
    }

    #[test]
    fn scale_free_hits_edge_count_and_is_connected() {
        for seed in 0..20 {
            let net = generate_scale_free(100, 109, 2.7, seed).unwrap();
            net.validate().unwrap();
            assert_eq!(net.node_count(), 100);
            assert_eq!(net.edge_count(), 109);
            assert!(net.is_connected(), "seed {seed}");
            assert!((0..100).all(|i| net.degree(i) >= 1));
        }
    }

    #[test]
    fn scale_free_rejects_bad_parameters() {
        assert!(matches!(generate_scale_free(100, 109, 2.0, 1), Err(GraphError::InvalidParameter(_))));
        assert!(matches!(generate_scale_free(100, 98, 2.5, 1), Err(GraphError::InvalidParameter(_))));
        assert!(matches!(generate_scale_free(1, 0, 2.5, 1), Err(GraphError::InvalidParameter(_))));
        assert!(matches!(generate_scale_free(4, 7, 2.5, 1), Err(GraphError::InvalidParameter(_))));
    }

    #[test]
    fn complete_graph_is_reachable() {
        let net = generate_scale_free(5, 10, 2.5, 9).unwrap();
        assert_eq!(net.edge_count(), 10);
        assert!((0..5).all(|i| net.degree(i) == 4));
    }

    #[test]
    fn ring_lattice_without_rewiring() {
        let net = generate_small_world(100, 4, 0.0, 5).unwrap();
        assert_eq!(net.edge_count(), 200);
        assert!((0..100).all(|i| net.degree(i) == 4));
        assert_eq!(net.in_neighbors(0), &[1, 2, 98, 99]);
    }

    #[test]
    fn small_world_keeps_edge_count() {
        let net = generate_small_world(100, 4, 0.2, 5).unwrap();
        net.validate().unwrap();
        assert_eq!((net.node_count(), net.edge_count()), (100, 200));

        let tiny = generate_small_world(6, 2, 1.0, 11).unwrap();
        tiny.validate().unwrap();
        assert_eq!((tiny.node_count(), tiny.edge_count()), (6, 6));
    }

    #[test]
    fn small_world_rejects_bad_parameters() {
        assert!(generate_small_world(100, 3, 0.2, 1).is_err());
        assert!(generate_small_world(100, 4, 1.5, 1).is_err());
        assert!(generate_small_world(100, 4, -0.1, 1).is_err());
        assert!(generate_small_world(4, 4, 0.1, 1).is_err());
        assert!(generate_small_world(4, 0, 0.1, 1).is_err());
    }

    #[test]
    fn loads_path() {
        let net = load_edge_list("0 1\n1 2".as_bytes(), false).unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.edges(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn load_collapses_duplicates_and_drops_self_loops() {
        let net = load_edge_list("# comment\n5 7\n7 5\n5 5".as_bytes(), false).unwrap();
        assert_eq!((net.node_count(), net.edge_count()), (2, 1));
        assert_eq!(
            net.meta(),
            &Provenance::Loaded { self_loops_dropped: 1, duplicates_collapsed: 1 }
        );
    }

    #[test]
    fn load_directed_sets_infection_direction() {
        // "j i": host j can infect host i.
        let net = load_edge_list("10 20\n".as_bytes(), true).unwrap();
        assert_eq!(net.in_neighbors(1), &[0]);
        assert!(net.in_neighbors(0).is_empty());
        assert_eq!(net.edge_count(), 1);
    }

    #[test]
    fn load_errors() {
        match load_edge_list("0 1\n1 x\n".as_bytes(), false) {
            Err(GraphError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(load_edge_list("# nothing\n".as_bytes(), false), Err(GraphError::EmptyEdgeSet)));
        assert!(matches!(load_edge_list("3 3\n".as_bytes(), false), Err(GraphError::EmptyEdgeSet)));
        assert!(matches!(load_edge_list("1 2 3\n".as_bytes(), false), Err(GraphError::Parse { line: 1, .. })));
    }

    #[test]
    fn written_edge_list_reloads_to_same_edges() {
        let net = generate_small_world(30, 4, 0.3, 2).unwrap();
        let mut buf = Vec::new();
        net.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# virus-damage network\n# kind: small-world\n"));
        let back = load_edge_list(text.as_bytes(), false).unwrap();
        assert_eq!(back.edges(), net.edges());
    }

    #[test]
    fn degree_stats_examples() {
        let ring = generate_small_world(100, 4, 0.0, 0).unwrap();
        let s = degree_stats(&ring);
        assert_eq!((s.mean_degree, s.degree_variance, s.max_degree), (4.0, 0.0, 4));

        let s = degree_stats(&Network::path(2));
        assert_eq!((s.mean_degree, s.max_degree), (1.0, 1));
        assert_eq!(s.estimated_power_exponent, None);

        let s = degree_stats(&Network::star(5));
        assert!((s.mean_degree - 1.6).abs() < 1e-12);
        assert_eq!(s.max_degree, 4);
        assert!((s.degree_variance - 1.44).abs() < 1e-12);
    }

    #[test]
    fn validator_catches_asymmetry() {
        let mut net = Network::path(3);
        net.in_neighbors[0].clear();
        assert!(net.validate().is_err());
    }
}
