//! Resilience and utility metrics plus the combined optimization objective
//! alpha * R + (1 - alpha) * U.

mod eigen;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{attack_curve_counts, AttackStrategy};
use crate::error::{CoreError, Result};
use crate::graph::Graph;

#[cfg(test)]
use eigen::dense_symmetric_eigenvalues;

/// Largest graph handled by the dense eigensolver; larger ones go to Lanczos.
const DENSE_EIGEN_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResilienceKind {
    /// Attack-curve mean R(G).
    ConnectivityR,
    /// Largest adjacency eigenvalue.
    SpectralRadius,
    /// Second-smallest Laplacian eigenvalue.
    AlgebraicConnectivity,
}

impl std::str::FromStr for ResilienceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "R" | "r" | "connectivity" => Ok(Self::ConnectivityR),
            "sr" | "spectral-radius" => Ok(Self::SpectralRadius),
            "ac" | "algebraic-connectivity" => Ok(Self::AlgebraicConnectivity),
            other => Err(format!("unknown resilience kind {other:?} (expected R|sr|ac)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    GlobalEfficiency,
    LocalEfficiency,
    None,
}

impl std::str::FromStr for UtilityKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "global" | "global-efficiency" => Ok(Self::GlobalEfficiency),
            "local" | "local-efficiency" => Ok(Self::LocalEfficiency),
            "none" => Ok(Self::None),
            other => Err(format!("unknown utility kind {other:?} (expected global|local|none)")),
        }
    }
}

/// Everything needed to score a graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub alpha: f64,
    pub resilience_kind: ResilienceKind,
    pub utility_kind: UtilityKind,
    pub attack: AttackStrategy,
    /// Attack-centrality recomputation stride; 1 = fully adaptive.
    #[serde(default = "default_recompute_every")]
    pub attack_recompute_every: usize,
}

fn default_recompute_every() -> usize {
    1
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            resilience_kind: ResilienceKind::ConnectivityR,
            utility_kind: UtilityKind::GlobalEfficiency,
            attack: AttackStrategy::Degree,
            attack_recompute_every: 1,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || !(0.0..=1.0).contains(&self.alpha) {
            return Err(CoreError::Parameter(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.attack_recompute_every == 0 {
            return Err(CoreError::Parameter(
                "attack_recompute_every must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Attack-curve mean.
///
/// Component counts are summed as integers and divided by N^2 in a single
/// operation, so closed-form values (complete and star graphs) are exact.
#[allow(non_snake_case)]
pub fn resilience_R(g: &Graph, attack: AttackStrategy) -> f64 {
    resilience_r_strided(g, attack, 1)
}

pub fn resilience_r_strided(g: &Graph, attack: AttackStrategy, recompute_every: usize) -> f64 {
    let n = g.node_count();
    if n == 0 {
        return 0.0;
    }
    let curve = attack_curve_counts(g, attack, recompute_every);
    let total: u64 = curve.largest_cc.iter().sum();
    total as f64 / (n as u64 * n as u64) as f64
}

fn adjacency_matvec(g: &Graph, x: &[f64], y: &mut [f64]) {
    for v in 0..g.node_count() {
        let mut acc = 0.0;
        for &w in g.neighbors(v as u32) {
            acc += x[w as usize];
        }
        y[v] = acc;
    }
}

fn dense_adjacency(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for (u, v) in g.undirected_edges() {
        a[u as usize][v as usize] = 1.0;
        a[v as usize][u as usize] = 1.0;
    }
    a
}

/// Largest adjacency eigenvalue, to relative tolerance 1e-8.
pub fn spectral_radius(g: &Graph) -> Result<f64> {
    let n = g.node_count();
    if g.edge_count() == 0 {
        return Ok(0.0);
    }
    if n <= DENSE_EIGEN_LIMIT {
        let ev = eigen::dense_symmetric_eigenvalues(dense_adjacency(g))?;
        Ok(*ev.last().expect("nonempty spectrum"))
    } else {
        // Perron-Frobenius: the largest algebraic eigenvalue is the radius.
        eigen::lanczos_largest(n, |x, y| adjacency_matvec(g, x, y), &[])
    }
}

/// Second-smallest Laplacian eigenvalue; exactly 0.0 for disconnected graphs.
pub fn algebraic_connectivity(g: &Graph) -> Result<f64> {
    let n = g.node_count();
    if n <= 1 || !g.is_connected() {
        return Ok(0.0);
    }
    if n <= DENSE_EIGEN_LIMIT {
        let mut l = dense_adjacency(g);
        for (i, row) in l.iter_mut().enumerate() {
            for x in row.iter_mut() {
                *x = -*x;
            }
            row[i] = g.degree(i as u32) as f64;
        }
        let ev = eigen::dense_symmetric_eigenvalues(l)?;
        Ok(ev[1].max(0.0))
    } else {
        // Shift to c*I - L, deflate the all-ones kernel direction, and read
        // lambda_2 off the dominant remaining eigenvalue.
        let degrees = g.degrees();
        let c = 2.0 * degrees.iter().copied().max().unwrap_or(0) as f64 + 1.0;
        let matvec = |x: &[f64], y: &mut [f64]| {
            adjacency_matvec(g, x, y);
            for i in 0..n {
                y[i] += (c - degrees[i] as f64) * x[i];
            }
        };
        let ones = vec![1.0 / (n as f64).sqrt(); n];
        let top = eigen::lanczos_largest(n, matvec, &[ones])?;
        Ok((c - top).max(0.0))
    }
}

fn efficiency_sum(g: &Graph, sources: std::ops::Range<u32>) -> f64 {
    let mut dist = Vec::new();
    let mut acc = 0.0;
    for s in sources {
        g.bfs_distances_into(s, &mut dist);
        for (t, &d) in dist.iter().enumerate() {
            if t as u32 != s && d != u32::MAX {
                acc += 1.0 / d as f64;
            }
        }
    }
    acc
}

/// Mean inverse shortest-path length over ordered pairs; unreachable pairs
/// contribute 0. Equals 1 on complete graphs. Returns 0 for N < 2.
pub fn global_efficiency(g: &Graph) -> f64 {
    let n = g.node_count();
    if n < 2 {
        return 0.0;
    }
    let total: f64 = if n >= 256 {
        let blocks: Vec<f64> = (0..n as u32)
            .collect::<Vec<_>>()
            .par_chunks(64)
            .map(|c| efficiency_sum(g, c[0]..*c.last().unwrap() + 1))
            .collect();
        blocks.iter().sum()
    } else {
        efficiency_sum(g, 0..n as u32)
    };
    total / (n as u64 * (n as u64 - 1)) as f64
}

/// Mean global efficiency of each node's neighborhood subgraph (the node
/// itself excluded). Neighborhoods with fewer than two nodes contribute 0.
pub fn local_efficiency(g: &Graph) -> f64 {
    let n = g.node_count();
    if n == 0 {
        return 0.0;
    }
    let per_node: Vec<f64> = (0..n as u32)
        .into_par_iter()
        .map(|v| {
            let nbrs = g.neighbors(v);
            if nbrs.len() < 2 {
                return 0.0;
            }
            global_efficiency(&g.induced_subgraph(nbrs))
        })
        .collect();
    per_node.iter().sum::<f64>() / n as f64
}

fn resilience_value(g: &Graph, cfg: &ObjectiveConfig) -> Result<f64> {
    match cfg.resilience_kind {
        ResilienceKind::ConnectivityR => {
            Ok(resilience_r_strided(g, cfg.attack, cfg.attack_recompute_every))
        }
        ResilienceKind::SpectralRadius => spectral_radius(g),
        ResilienceKind::AlgebraicConnectivity => algebraic_connectivity(g),
    }
}

fn utility_value(g: &Graph, cfg: &ObjectiveConfig) -> f64 {
    match cfg.utility_kind {
        UtilityKind::GlobalEfficiency => global_efficiency(g),
        UtilityKind::LocalEfficiency => local_efficiency(g),
        UtilityKind::None => 0.0,
    }
}

/// alpha * resilience + (1 - alpha) * utility. The side with weight 0 is not
/// evaluated at all.
pub fn combined_objective(g: &Graph, cfg: &ObjectiveConfig) -> Result<f64> {
    cfg.validate()?;
    let resilience = if cfg.alpha == 0.0 { 0.0 } else { resilience_value(g, cfg)? };
    let utility = if cfg.alpha == 1.0 { 0.0 } else { utility_value(g, cfg) };
    Ok(cfg.alpha * resilience + (1.0 - cfg.alpha) * utility)
}
