//! Nested subgraph filtration and per-level node features.
//!
//! The filtration peels the graph by repeatedly deleting the highest-degree
//! node (ties broken toward the lowest node id). Each level stores a compact
//! induced subgraph plus the mapping back to original node ids, so downstream
//! encoders can scatter level embeddings into the full id space.

use rewire_core::{CoreError, Graph};

use crate::error::Result;
use crate::tensor::Tensor;

/// Node feature width: normalized degree plus an 8-dim positional encoding.
pub const NODE_FEATURE_DIM: usize = 9;

/// Default filtration order for an N-node graph.
pub fn default_filtration_order(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        5.min(n - 1)
    }
}

/// One level of the filtration.
#[derive(Debug, Clone)]
pub struct FiltrationLevel {
    /// Induced subgraph on the surviving nodes, relabeled to 0..k.
    pub graph: Graph,
    /// Compact id -> original id, ascending.
    pub node_map: Vec<u32>,
    /// Indexed by original id: does this level still contain the node?
    pub present: Vec<bool>,
    /// Indexed by original id: present but with degree 0 at this level.
    pub isolated: Vec<bool>,
}

impl FiltrationLevel {
    fn from_survivors(n: usize, g: &Graph, survivors: &[u32]) -> FiltrationLevel {
        let graph = g.induced_subgraph(survivors);
        let mut present = vec![false; n];
        let mut isolated = vec![false; n];
        for (compact, &orig) in survivors.iter().enumerate() {
            present[orig as usize] = true;
            isolated[orig as usize] = graph.degree(compact as u32) == 0;
        }
        FiltrationLevel {
            graph,
            node_map: survivors.to_vec(),
            present,
            isolated,
        }
    }
}

/// The ordered filtration: `levels[0]` is the smallest subgraph, the last
/// level is the input graph itself.
#[derive(Debug, Clone)]
pub struct FiltratedGraph {
    pub n: usize,
    pub levels: Vec<FiltrationLevel>,
    /// `removed[i]` is the original id deleted from `levels[i+1]` to produce
    /// `levels[i]`; ordered to align with `levels`.
    pub removed: Vec<u32>,
}

impl FiltratedGraph {
    pub fn order(&self) -> usize {
        self.levels.len() - 1
    }

    /// Index of the level holding the unmodified input graph.
    pub fn top_level(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Highest-degree node of `g`, ties broken toward the lowest id.
fn argmax_degree(g: &Graph) -> u32 {
    let mut best = 0u32;
    let mut best_deg = g.degree(0);
    for v in 1..g.node_count() as u32 {
        let d = g.degree(v);
        if d > best_deg {
            best = v;
            best_deg = d;
        }
    }
    best
}

/// Build the `order + 1` nested subgraphs of `g`.
pub fn build_filtration(g: &Graph, order: usize) -> Result<FiltratedGraph> {
    let n = g.node_count();
    if n == 0 {
        return Err(CoreError::Parameter("filtration of an empty graph".into()).into());
    }
    if order > n - 1 {
        return Err(CoreError::Parameter(format!(
            "filtration order {order} out of range for {n} nodes (need 0 <= K <= {})",
            n - 1
        ))
        .into());
    }
    let mut survivors: Vec<u32> = (0..n as u32).collect();
    let mut levels = vec![FiltrationLevel::from_survivors(n, g, &survivors)];
    let mut removed = Vec::with_capacity(order);
    for _ in 0..order {
        let level = levels.last().unwrap();
        let victim_compact = argmax_degree(&level.graph);
        let victim = level.node_map[victim_compact as usize];
        removed.push(victim);
        survivors.retain(|&v| v != victim);
        levels.push(FiltrationLevel::from_survivors(n, g, &survivors));
    }
    levels.reverse();
    removed.reverse();
    Ok(FiltratedGraph { n, levels, removed })
}

/// Per-node features of one level: normalized degree followed by an 8-dim
/// sinusoidal encoding (base 10000) of the node's competition rank in the
/// descending-degree order of that level. Ranks are id-free: rank(v) counts
/// nodes of strictly larger degree, so tied nodes share a rank.
pub fn node_features(level: &Graph) -> Tensor {
    let n = level.node_count();
    let degrees: Vec<usize> = (0..n as u32).map(|v| level.degree(v)).collect();
    let max_deg = degrees.iter().copied().max().unwrap_or(0);
    let mut data = Vec::with_capacity(n * NODE_FEATURE_DIM);
    for v in 0..n {
        let norm_deg = if max_deg == 0 {
            0.0
        } else {
            degrees[v] as f64 / max_deg as f64
        };
        data.push(norm_deg);
        let rank = degrees.iter().filter(|&&d| d > degrees[v]).count() as f64;
        for t in 0..4 {
            let freq = 10000f64.powf(2.0 * t as f64 / 8.0);
            data.push((rank / freq).sin());
            data.push((rank / freq).cos());
        }
    }
    Tensor::from_vec(n, NODE_FEATURE_DIM, data).expect("feature dimensions are consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rewire_core::graph::ba_generate;

    fn star(n: usize) -> Graph {
        let edges: Vec<(u32, u32)> = (1..n as u32).map(|v| (0, v)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn star5_k1_removes_hub_leaving_isolated_leaves() {
        let g = star(5);
        let filt = build_filtration(&g, 1).unwrap();
        assert_eq!(filt.levels.len(), 2);
        assert_eq!(filt.removed, vec![0]);
        let bottom = &filt.levels[0];
        assert_eq!(bottom.graph.node_count(), 4);
        assert_eq!(bottom.graph.edge_count(), 0);
        assert!(!bottom.present[0]);
        for v in 1..5 {
            assert!(bottom.present[v]);
            assert!(bottom.isolated[v]);
        }
        let top = &filt.levels[1];
        assert_eq!(top.graph.edge_count(), 4);
        assert!(top.present.iter().all(|&p| p));
        assert!(top.isolated.iter().all(|&i| !i));
    }

    #[test]
    fn k_zero_keeps_only_the_input() {
        let g = ba_generate(9, 2, 3).unwrap();
        let filt = build_filtration(&g, 0).unwrap();
        assert_eq!(filt.levels.len(), 1);
        assert!(filt.removed.is_empty());
        assert_eq!(filt.levels[0].graph, g);
        assert_eq!(filt.levels[0].node_map, (0..9).collect::<Vec<u32>>());
    }

    #[test]
    fn k4_full_filtration_removal_order_follows_id_tie_break() {
        let g = Graph::complete(4);
        let filt = build_filtration(&g, 3).unwrap();
        let counts: Vec<usize> = filt.levels.iter().map(|l| l.graph.node_count()).collect();
        assert_eq!(counts, vec![1, 2, 3, 4]);
        assert_eq!(filt.removed, vec![2, 1, 0]);
        // Read in peeling order (top down) the removals are 0, 1, 2.
        let peel: Vec<u32> = filt.removed.iter().rev().copied().collect();
        assert_eq!(peel, vec![0, 1, 2]);
    }

    #[test]
    fn order_out_of_range_is_rejected() {
        let g = Graph::complete(4);
        assert!(build_filtration(&g, 4).is_err());
        assert!(build_filtration(&g, 3).is_ok());
    }

    #[test]
    fn nesting_and_monotone_counts_hold_on_ba_graphs() {
        for seed in 0..5 {
            let g = ba_generate(16, 2, seed).unwrap();
            let filt = build_filtration(&g, 6).unwrap();
            for i in 0..filt.levels.len() - 1 {
                let small = &filt.levels[i];
                let big = &filt.levels[i + 1];
                assert!(small.graph.node_count() < big.graph.node_count());
                assert!(small.graph.edge_count() <= big.graph.edge_count());
                // Every edge of the smaller level survives in the larger one,
                // mapped through original ids.
                for (u, v) in small.graph.undirected_edges() {
                    let ou = small.node_map[u as usize];
                    let ov = small.node_map[v as usize];
                    let bu = big.node_map.iter().position(|&x| x == ou).unwrap();
                    let bv = big.node_map.iter().position(|&x| x == ov).unwrap();
                    assert!(big.graph.has_edge(bu as u32, bv as u32));
                }
            }
            // Each removal targets the highest degree of its level.
            for (i, &victim) in filt.removed.iter().enumerate() {
                let level = &filt.levels[i + 1];
                let compact = level.node_map.iter().position(|&x| x == victim).unwrap();
                let deg = level.graph.degree(compact as u32);
                let max = (0..level.graph.node_count() as u32)
                    .map(|v| level.graph.degree(v))
                    .max()
                    .unwrap();
                assert_eq!(deg, max);
            }
        }
    }

    #[test]
    fn features_are_bounded_and_rank_is_id_free() {
        let g = ba_generate(12, 2, 7).unwrap();
        let feats = node_features(&g);
        assert_eq!(feats.shape(), (12, NODE_FEATURE_DIM));
        for v in feats.value() {
            assert!((-1.0..=1.0).contains(&v));
        }
        // A degree-regular graph has every node at rank 0 with identical rows.
        let ring = Graph::from_edges(
            5,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)],
        )
        .unwrap();
        let f = node_features(&ring);
        let vals = f.value();
        for v in 1..5 {
            assert_eq!(
                &vals[v * NODE_FEATURE_DIM..(v + 1) * NODE_FEATURE_DIM],
                &vals[0..NODE_FEATURE_DIM]
            );
        }
        assert_eq!(vals[0], 1.0);
    }

    #[test]
    fn default_order_caps_at_five() {
        assert_eq!(default_filtration_order(15), 5);
        assert_eq!(default_filtration_order(4), 3);
        assert_eq!(default_filtration_order(1), 0);
    }
}
