//! Graph generators and samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Graph;
use crate::error::{CoreError, Result};

/// Barabasi-Albert scale-free graph: a complete seed graph on `m + 1` nodes,
/// then each new node attaches to `m` distinct existing nodes with
/// probability proportional to their current degree.
///
/// Edge count is exactly `C(m+1, 2) + m * (n - m - 1)` and the result is
/// always connected.
pub fn ba_generate(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m < 1 || n < m + 1 {
        return Err(CoreError::Parameter(format!(
            "Barabasi-Albert requires m >= 1 and n >= m + 1, got n={n}, m={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n);
    for u in 0..m as u32 {
        for v in (u + 1)..=m as u32 {
            g.add_edge(u, v).expect("seed clique edges are valid");
        }
    }
    // Each node id appears once per unit of degree; uniform draws from this
    // list are degree-proportional draws.
    let mut endpoint_pool: Vec<u32> = Vec::with_capacity(2 * (m * (m + 1) / 2 + m * n));
    for v in 0..=m as u32 {
        for _ in 0..m {
            endpoint_pool.push(v);
        }
    }
    let mut chosen: Vec<u32> = Vec::with_capacity(m);
    for new_node in (m + 1)..n {
        chosen.clear();
        while chosen.len() < m {
            let t = endpoint_pool[rng.gen_range(0..endpoint_pool.len())];
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for &t in &chosen {
            g.add_edge(new_node as u32, t).expect("fresh node, distinct targets");
            endpoint_pool.push(new_node as u32);
            endpoint_pool.push(t);
        }
    }
    debug_assert_eq!(g.edge_count(), m * (m + 1) / 2 + m * (n - m - 1));
    Ok(g)
}

/// Induced subgraph on the first `target_n` distinct nodes visited by a
/// simple random walk from a uniformly random start, relabeled to
/// `0..target_n` in first-visit order.
///
/// A walk that fails to collect `target_n` distinct nodes within `100 * n`
/// steps is restarted from a fresh uniform node, up to 10 times.
pub fn random_walk_sample(g: &Graph, target_n: usize, seed: u64) -> Result<Graph> {
    let n = g.node_count();
    if target_n == 0 || target_n > n {
        return Err(CoreError::Parameter(format!(
            "sample size must be in 1..={n}, got {target_n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step_cap = 100 * n;
    for _restart in 0..10 {
        let start = rng.gen_range(0..n) as u32;
        let mut visited = vec![false; n];
        let mut order: Vec<u32> = Vec::with_capacity(target_n);
        visited[start as usize] = true;
        order.push(start);
        let mut cur = start;
        let mut steps = 0usize;
        while order.len() < target_n && steps < step_cap {
            let ns = g.neighbors(cur);
            if ns.is_empty() {
                break; // isolated start; restart
            }
            cur = ns[rng.gen_range(0..ns.len())];
            if !visited[cur as usize] {
                visited[cur as usize] = true;
                order.push(cur);
            }
            steps += 1;
        }
        if order.len() == target_n {
            return Ok(g.induced_subgraph(&order));
        }
    }
    Err(CoreError::Sampling(format!(
        "random walk failed to reach {target_n} distinct nodes within {step_cap} steps after 10 restarts"
    )))
}
