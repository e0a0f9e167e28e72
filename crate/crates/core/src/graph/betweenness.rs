//! Exact betweenness centrality for unweighted graphs (Brandes' algorithm).
//!
//! Sources are processed in fixed-size blocks and the per-block partial sums
//! are reduced in block order, so results do not depend on thread count.

use rayon::prelude::*;

use super::Graph;

const BLOCK: usize = 32;

fn source_pass(
    g: &Graph,
    s: u32,
    alive: Option<&[bool]>,
    dist: &mut [i64],
    sigma: &mut [f64],
    delta: &mut [f64],
    order: &mut Vec<u32>,
    bc: &mut [f64],
) {
    for v in 0..g.node_count() {
        dist[v] = -1;
        sigma[v] = 0.0;
        delta[v] = 0.0;
    }
    order.clear();
    dist[s as usize] = 0;
    sigma[s as usize] = 1.0;
    order.push(s);
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        let dv = dist[v as usize];
        for &w in g.neighbors(v) {
            if alive.is_some_and(|a| !a[w as usize]) {
                continue;
            }
            let wi = w as usize;
            if dist[wi] < 0 {
                dist[wi] = dv + 1;
                order.push(w);
            }
            if dist[wi] == dv + 1 {
                sigma[wi] += sigma[v as usize];
            }
        }
    }
    for &w in order.iter().rev() {
        let wi = w as usize;
        let coeff = (1.0 + delta[wi]) / sigma[wi];
        for &v in g.neighbors(w) {
            if alive.is_some_and(|a| !a[v as usize]) {
                continue;
            }
            let vi = v as usize;
            if dist[vi] == dist[wi] - 1 {
                delta[vi] += sigma[vi] * coeff;
            }
        }
        if w != s {
            bc[wi] += delta[wi];
        }
    }
}

fn betweenness_impl(g: &Graph, alive: Option<&[bool]>) -> Vec<f64> {
    let n = g.node_count();
    let sources: Vec<u32> =
        (0..n as u32).filter(|&v| alive.is_none_or(|a| a[v as usize])).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(BLOCK)
        .map(|block| {
            let mut bc = vec![0.0; n];
            let mut dist = vec![-1i64; n];
            let mut sigma = vec![0.0; n];
            let mut delta = vec![0.0; n];
            let mut order = Vec::with_capacity(n);
            for &s in block {
                source_pass(g, s, alive, &mut dist, &mut sigma, &mut delta, &mut order, &mut bc);
            }
            bc
        })
        .collect();
    let mut bc = vec![0.0; n];
    for partial in partials {
        for (acc, x) in bc.iter_mut().zip(partial) {
            *acc += x;
        }
    }
    // Undirected: each unordered pair is counted from both endpoints.
    for x in &mut bc {
        *x *= 0.5;
    }
    bc
}

pub fn betweenness(g: &Graph) -> Vec<f64> {
    betweenness_impl(g, None)
}

/// Betweenness of the subgraph induced by `alive` nodes, indexed by the
/// original node ids (dead nodes get 0).
pub(crate) fn betweenness_masked(g: &Graph, alive: &[bool]) -> Vec<f64> {
    debug_assert_eq!(alive.len(), g.node_count());
    betweenness_impl(g, Some(alive))
}
