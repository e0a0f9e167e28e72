//! Undirected simple-graph representation and elementary queries.
//!
//! Nodes are dense ids `0..n`. Adjacency is stored twice: sorted per-node
//! neighbor lists (fast iteration, cheap degree lookup) and a canonical
//! `(min, max)` pair set (O(1) membership tests, which the rewiring
//! feasibility checks hammer).

mod betweenness;
mod generate;
mod io;

pub use betweenness::betweenness;
pub(crate) use betweenness::betweenness_masked;
pub use generate::{ba_generate, random_walk_sample};
pub use io::{load_edge_list, parse_edge_list, save_edge_list, write_edge_list};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, FeasibilityViolation, Result};

/// A directed view of an undirected edge: the orientation `tail -> head`.
///
/// Rewiring actions pick edges together with a direction, so most action
/// plumbing passes these around instead of unordered pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeRef {
    pub tail: u32,
    pub head: u32,
}

impl EdgeRef {
    pub fn new(tail: u32, head: u32) -> Self {
        Self { tail, head }
    }

    /// The same undirected edge, traversed the other way.
    pub fn reversed(self) -> Self {
        Self { tail: self.head, head: self.tail }
    }

    /// Canonical `(min, max)` form of the underlying undirected edge.
    pub fn undirected(self) -> (u32, u32) {
        if self.tail < self.head {
            (self.tail, self.head)
        } else {
            (self.head, self.tail)
        }
    }
}

impl std::fmt::Display for EdgeRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}->{}", self.tail, self.head)
    }
}

/// Undirected simple graph on nodes `0..n`. No self-loops, no multi-edges.
#[derive(Debug, Clone)]
pub struct Graph {
    neighbors: Vec<Vec<u32>>,
    edges: HashSet<(u32, u32)>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.neighbors == other.neighbors
    }
}
impl Eq for Graph {}

fn canon(u: u32, v: u32) -> (u32, u32) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl Graph {
    /// An edgeless graph on `n` nodes.
    pub fn empty(n: usize) -> Self {
        Self { neighbors: vec![Vec::new(); n], edges: HashSet::new() }
    }

    /// Builds a graph from an explicit edge list, rejecting self-loops,
    /// duplicates and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Complete graph on `n` nodes.
    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for u in 0..n as u32 {
            for v in (u + 1)..n as u32 {
                g.add_edge(u, v).expect("complete graph edges are valid");
            }
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: u32) -> usize {
        self.neighbors[v as usize].len()
    }

    /// Degrees of all nodes, indexed by node id.
    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Degree multiset in descending order. Two graphs related by a
    /// degree-preserving rewiring sequence have equal degree sequences.
    pub fn degree_sequence(&self) -> Vec<usize> {
        let mut d = self.degrees();
        d.sort_unstable_by(|a, b| b.cmp(a));
        d
    }

    /// Sorted neighbor ids of `v`.
    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.neighbors[v as usize]
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        u != v && self.edges.contains(&canon(u, v))
    }

    /// True when the undirected edge behind `e` is present.
    pub fn contains_edge_ref(&self, e: EdgeRef) -> bool {
        self.has_edge(e.tail, e.head)
    }

    /// Undirected edges in canonical `(min, max)` form, lexicographically sorted.
    pub fn undirected_edges(&self) -> Vec<(u32, u32)> {
        let mut es: Vec<(u32, u32)> = self.edges.iter().copied().collect();
        es.sort_unstable();
        es
    }

    /// Both orientations of every edge, sorted by `(tail, head)`. This is the
    /// canonical directed-edge indexing used by embeddings and policies.
    pub fn directed_edges(&self) -> Vec<EdgeRef> {
        let mut es = Vec::with_capacity(2 * self.edge_count());
        for (u, ns) in self.neighbors.iter().enumerate() {
            for &v in ns {
                es.push(EdgeRef::new(u as u32, v));
            }
        }
        es
    }

    /// Low-level mutator. Maintains simplicity invariants by erroring on
    /// self-loops, duplicates and out-of-range ids.
    pub fn add_edge(&mut self, u: u32, v: u32) -> Result<()> {
        let n = self.node_count();
        for x in [u, v] {
            if x as usize >= n {
                return Err(FeasibilityViolation::NodeOutOfRange { node: x, n }.into());
            }
        }
        if u == v {
            return Err(FeasibilityViolation::SelfLoop { u, v }.into());
        }
        if !self.edges.insert(canon(u, v)) {
            return Err(CoreError::Parameter(format!("duplicate edge {{{u}, {v}}}")));
        }
        let pos = self.neighbors[u as usize].partition_point(|&x| x < v);
        self.neighbors[u as usize].insert(pos, v);
        let pos = self.neighbors[v as usize].partition_point(|&x| x < u);
        self.neighbors[v as usize].insert(pos, u);
        Ok(())
    }

    /// Low-level mutator; errors if the edge is absent.
    pub fn remove_edge(&mut self, u: u32, v: u32) -> Result<()> {
        if !self.edges.remove(&canon(u, v)) {
            return Err(CoreError::Parameter(format!("edge {{{u}, {v}}} not present")));
        }
        let pos = self.neighbors[u as usize].binary_search(&v).expect("edge set in sync");
        self.neighbors[u as usize].remove(pos);
        let pos = self.neighbors[v as usize].binary_search(&u).expect("edge set in sync");
        self.neighbors[v as usize].remove(pos);
        Ok(())
    }

    /// Removes every edge incident to `v`, leaving it isolated. The id space
    /// is unchanged; attack simulations use this as their node-removal step.
    pub fn isolate_node(&mut self, v: u32) {
        let ns = std::mem::take(&mut self.neighbors[v as usize]);
        for u in ns {
            self.edges.remove(&canon(u, v));
            let pos = self.neighbors[u as usize].binary_search(&v).expect("edge set in sync");
            self.neighbors[u as usize].remove(pos);
        }
    }

    /// Induced subgraph on `nodes`, relabeled so that new id `i` is
    /// `nodes[i]`. Order of `nodes` therefore fixes the relabeling.
    pub fn induced_subgraph(&self, nodes: &[u32]) -> Graph {
        let mut new_id = vec![u32::MAX; self.node_count()];
        for (i, &v) in nodes.iter().enumerate() {
            debug_assert!(new_id[v as usize] == u32::MAX, "duplicate node in selection");
            new_id[v as usize] = i as u32;
        }
        let mut g = Graph::empty(nodes.len());
        for &(u, v) in &self.edges {
            let (nu, nv) = (new_id[u as usize], new_id[v as usize]);
            if nu != u32::MAX && nv != u32::MAX {
                g.add_edge(nu, nv).expect("induced edges are valid");
            }
        }
        g
    }

    /// BFS hop distances from `src`; `u32::MAX` marks unreachable nodes.
    pub fn bfs_distances(&self, src: u32) -> Vec<u32> {
        let mut dist = Vec::new();
        self.bfs_distances_into(src, &mut dist);
        dist
    }

    /// [`Self::bfs_distances`] writing into a reusable buffer.
    pub fn bfs_distances_into(&self, src: u32, dist: &mut Vec<u32>) {
        dist.clear();
        dist.resize(self.node_count(), u32::MAX);
        dist[src as usize] = 0;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize];
            for &v in self.neighbors(u) {
                if dist[v as usize] == u32::MAX {
                    dist[v as usize] = du + 1;
                    queue.push_back(v);
                }
            }
        }
    }

    /// Sizes of all connected components (isolated nodes count as size 1).
    pub fn component_sizes(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            stack.push(s as u32);
            let mut size = 0usize;
            while let Some(u) = stack.pop() {
                size += 1;
                for &v in self.neighbors(u) {
                    if !seen[v as usize] {
                        seen[v as usize] = true;
                        stack.push(v);
                    }
                }
            }
            sizes.push(size);
        }
        sizes
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        n <= 1 || self.largest_component_size() == n
    }

    pub fn largest_component_size(&self) -> usize {
        self.component_sizes().into_iter().max().unwrap_or(0)
    }

    /// Size of the largest connected component after deleting `removed`,
    /// divided by the *original* node count. Returns 0 when everything is
    /// removed.
    pub fn largest_cc_fraction(&self, removed: &[u32]) -> f64 {
        let n = self.node_count();
        if n == 0 {
            return 0.0;
        }
        let mut alive = vec![true; n];
        for &v in removed {
            alive[v as usize] = false;
        }
        self.largest_alive_component(&alive) as f64 / n as f64
    }

    /// Largest component size among nodes with `alive[v] = true`.
    pub(crate) fn largest_alive_component(&self, alive: &[bool]) -> usize {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut best = 0usize;
        let mut stack = Vec::new();
        for s in 0..n {
            if seen[s] || !alive[s] {
                continue;
            }
            seen[s] = true;
            stack.push(s as u32);
            let mut size = 0usize;
            while let Some(u) = stack.pop() {
                size += 1;
                for &v in self.neighbors(u) {
                    if alive[v as usize] && !seen[v as usize] {
                        seen[v as usize] = true;
                        stack.push(v);
                    }
                }
            }
            best = best.max(size);
        }
        best
    }

    /// Relabels nodes by `perm` (new id of `v` is `perm[v]`). Test helper for
    /// permutation-covariance checks.
    pub fn permuted(&self, perm: &[u32]) -> Graph {
        assert_eq!(perm.len(), self.node_count());
        let mut g = Graph::empty(self.node_count());
        for &(u, v) in &self.edges {
            g.add_edge(perm[u as usize], perm[v as usize]).expect("permutation preserves validity");
        }
        g
    }
}
