//! The degree-preserving rewiring MDP: state = graph, action = either stop or
//! a pair of directed edges (e1 = A->C, e2 = B->D), transition = remove
//! {A,C} and {B,D}, add {A,B} and {C,D}, reward = scaled objective gain.
//!
//! Feasibility requires A, B, C, D pairwise distinct, both removed edges
//! present, and all four of {A,B}, {C,D}, {A,D}, {B,C} absent. The forbidden
//! set is symmetric in the orientations of e1 and e2, so whether a pair of
//! undirected edges can be rewired at all does not depend on direction; the
//! directions only select which of the two possible outcomes is produced.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, FeasibilityViolation, Result};
use crate::graph::{EdgeRef, Graph};
use crate::metrics::{self, ObjectiveConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewiringAction {
    /// End the episode; the graph is left as is.
    Terminate,
    /// Remove the undirected edges behind `e1` and `e2`, then connect
    /// tail-to-tail and head-to-head.
    Rewire { e1: EdgeRef, e2: EdgeRef },
}

impl RewiringAction {
    pub fn rewire(a: u32, c: u32, b: u32, d: u32) -> Self {
        Self::Rewire { e1: EdgeRef::new(a, c), e2: EdgeRef::new(b, d) }
    }
}

impl std::fmt::Display for RewiringAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Terminate => f.write_str("terminate"),
            Self::Rewire { e1, e2 } => write!(f, "rewire({e1}, {e2})"),
        }
    }
}

/// Checks every rewiring constraint for `(e1, e2)` and names the first one
/// violated.
pub fn validate_rewiring(
    g: &Graph,
    e1: EdgeRef,
    e2: EdgeRef,
) -> std::result::Result<(), FeasibilityViolation> {
    let n = g.node_count();
    let (a, c, b, d) = (e1.tail, e1.head, e2.tail, e2.head);
    for node in [a, c, b, d] {
        if node as usize >= n {
            return Err(FeasibilityViolation::NodeOutOfRange { node, n });
        }
    }
    let nodes = [a, c, b, d];
    for i in 0..4 {
        for j in (i + 1)..4 {
            if nodes[i] == nodes[j] {
                return Err(FeasibilityViolation::NodesNotDistinct { a, c, b, d });
            }
        }
    }
    if !g.has_edge(a, c) {
        return Err(FeasibilityViolation::EdgeMissing { role: "e1", u: a, v: c });
    }
    if !g.has_edge(b, d) {
        return Err(FeasibilityViolation::EdgeMissing { role: "e2", u: b, v: d });
    }
    for (pair, u, v) in [("AB", a, b), ("CD", c, d), ("AD", a, d), ("BC", b, c)] {
        if g.has_edge(u, v) {
            return Err(FeasibilityViolation::ConflictingEdge { pair, u, v });
        }
    }
    Ok(())
}

/// All directed edges `B->D` that form a feasible rewiring with `e1`,
/// in canonical order (sorted undirected pairs, each in both orientations).
///
/// The set is identical for `e1` and `e1.reversed()`.
pub fn feasible_partners(g: &Graph, e1: EdgeRef) -> Vec<EdgeRef> {
    let (a, c) = (e1.tail, e1.head);
    let mut out = Vec::new();
    if !g.has_edge(a, c) {
        return out;
    }
    for (u, v) in g.undirected_edges() {
        if u == a || u == c || v == a || v == c {
            continue;
        }
        if g.has_edge(a, u) || g.has_edge(c, v) || g.has_edge(a, v) || g.has_edge(c, u) {
            continue;
        }
        out.push(EdgeRef::new(u, v));
        out.push(EdgeRef::new(v, u));
    }
    out
}

/// Directed edges usable as `e1`, i.e. those with at least one feasible
/// partner. Eligibility is orientation-symmetric, so edges appear here in
/// both orientations or not at all.
pub fn eligible_first_edges(g: &Graph) -> Vec<EdgeRef> {
    g.directed_edges().into_iter().filter(|&e| !feasible_partners(g, e).is_empty()).collect()
}

/// Number of ordered directed pairs `(e1, e2)` forming feasible rewirings.
pub fn action_space_size(g: &Graph) -> usize {
    let count: usize =
        g.directed_edges().iter().map(|&e1| feasible_partners(g, e1).len()).sum();
    let dir = 2 * g.edge_count();
    debug_assert!(count <= 2 * dir * dir.saturating_sub(1));
    count
}

/// The coarse bound 2|E|^2 with |E| counting directed edges.
pub fn action_space_upper_bound(g: &Graph) -> usize {
    let dir = 2 * g.edge_count();
    2 * dir * dir
}

/// Executes an action. `Terminate` returns the graph unchanged.
pub fn apply_rewiring(g: &Graph, action: RewiringAction) -> Result<Graph> {
    match action {
        RewiringAction::Terminate => Ok(g.clone()),
        RewiringAction::Rewire { e1, e2 } => {
            validate_rewiring(g, e1, e2)?;
            let mut next = g.clone();
            next.remove_edge(e1.tail, e1.head)?;
            next.remove_edge(e2.tail, e2.head)?;
            next.add_edge(e1.tail, e2.tail)?;
            next.add_edge(e1.head, e2.head)?;
            Ok(next)
        }
    }
}

/// The action undoing `action`: rewiring the two added edges back into the
/// two removed ones. Always feasible on the successor graph.
pub fn inverse_rewiring(action: RewiringAction) -> RewiringAction {
    match action {
        RewiringAction::Terminate => RewiringAction::Terminate,
        RewiringAction::Rewire { e1, e2 } => RewiringAction::Rewire {
            e1: EdgeRef::new(e1.tail, e2.tail),
            e2: EdgeRef::new(e1.head, e2.head),
        },
    }
}

/// Uniform sample over all ordered feasible `(e1, e2)` pairs, or `None` if no
/// rewiring is feasible. Rejection sampling with an exact enumeration
/// fallback, so uniformity holds even for sparse feasible sets.
pub fn sample_uniform_rewiring<R: Rng>(g: &Graph, rng: &mut R) -> Option<(EdgeRef, EdgeRef)> {
    let dir = g.directed_edges();
    if dir.len() < 4 {
        return None;
    }
    for _ in 0..256 {
        let e1 = dir[rng.gen_range(0..dir.len())];
        let e2 = dir[rng.gen_range(0..dir.len())];
        if validate_rewiring(g, e1, e2).is_ok() {
            return Some((e1, e2));
        }
    }
    let mut all = Vec::new();
    for &e1 in &dir {
        for e2 in feasible_partners(g, e1) {
            all.push((e1, e2));
        }
    }
    if all.is_empty() {
        None
    } else {
        Some(all[rng.gen_range(0..all.len())])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub objective: ObjectiveConfig,
    pub max_rewiring_budget: usize,
    pub reward_scale: f64,
    pub forbid_disconnecting: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveConfig::default(),
            max_rewiring_budget: 20,
            reward_scale: 10.0,
            forbid_disconnecting: false,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        if self.max_rewiring_budget == 0 {
            return Err(CoreError::Parameter("max_rewiring_budget must be at least 1".into()));
        }
        if !(self.reward_scale > 0.0) || !self.reward_scale.is_finite() {
            return Err(CoreError::Parameter(format!(
                "reward_scale must be positive and finite, got {}",
                self.reward_scale
            )));
        }
        Ok(())
    }
}

/// Objective value split into its weighted components. A side whose weight is
/// zero is skipped during evaluation and recorded as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParts {
    pub resilience: f64,
    pub utility: f64,
    pub combined: f64,
}

pub fn objective_parts(g: &Graph, cfg: &ObjectiveConfig) -> Result<ObjectiveParts> {
    cfg.validate()?;
    let resilience = if cfg.alpha == 0.0 {
        0.0
    } else {
        match cfg.resilience_kind {
            metrics::ResilienceKind::ConnectivityR => {
                metrics::resilience_r_strided(g, cfg.attack, cfg.attack_recompute_every)
            }
            metrics::ResilienceKind::SpectralRadius => metrics::spectral_radius(g)?,
            metrics::ResilienceKind::AlgebraicConnectivity => metrics::algebraic_connectivity(g)?,
        }
    };
    let utility = if cfg.alpha == 1.0 {
        0.0
    } else {
        match cfg.utility_kind {
            metrics::UtilityKind::GlobalEfficiency => metrics::global_efficiency(g),
            metrics::UtilityKind::LocalEfficiency => metrics::local_efficiency(g),
            metrics::UtilityKind::None => 0.0,
        }
    };
    Ok(ObjectiveParts {
        resilience,
        utility,
        combined: cfg.alpha * resilience + (1.0 - cfg.alpha) * utility,
    })
}

/// Objective components on both sides of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub before: ObjectiveParts,
    pub after: ObjectiveParts,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub next_graph: Graph,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Pure one-step transition. `done` reflects only the terminate action here;
/// budget accounting lives in [`Env`].
pub fn step(g: &Graph, action: RewiringAction, cfg: &EnvConfig) -> Result<StepResult> {
    cfg.validate()?;
    let before = objective_parts(g, &cfg.objective)?;
    match action {
        RewiringAction::Terminate => Ok(StepResult {
            next_graph: g.clone(),
            reward: 0.0,
            done: true,
            info: StepInfo { before, after: before },
        }),
        RewiringAction::Rewire { .. } => {
            let next = apply_rewiring(g, action)?;
            if cfg.forbid_disconnecting && !next.is_connected() {
                return Err(FeasibilityViolation::WouldDisconnect.into());
            }
            let after = objective_parts(&next, &cfg.objective)?;
            Ok(StepResult {
                next_graph: next,
                reward: cfg.reward_scale * (after.combined - before.combined),
                done: false,
                info: StepInfo { before, after },
            })
        }
    }
}

/// One line of the JSONL episode log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub t: usize,
    pub action: RewiringAction,
    pub reward: f64,
    pub objective_components: StepInfo,
}

/// Stateful episode wrapper: tracks the current graph, caches its objective,
/// counts accepted rewirings against the budget and latches `done`.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    initial: Graph,
    initial_objective: ObjectiveParts,
    graph: Graph,
    objective: ObjectiveParts,
    rewirings: usize,
    done: bool,
}

/// What [`Env::step`] reports; the successor graph is read off the env.
#[derive(Debug, Clone, Copy)]
pub struct EnvStep {
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

impl Env {
    pub fn new(graph: Graph, cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let objective = objective_parts(&graph, &cfg.objective)?;
        Ok(Self {
            cfg,
            initial: graph.clone(),
            initial_objective: objective,
            graph,
            objective,
            rewirings: 0,
            done: false,
        })
    }

    pub fn cfg(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn objective(&self) -> ObjectiveParts {
        self.objective
    }

    pub fn initial_objective(&self) -> ObjectiveParts {
        self.initial_objective
    }

    pub fn rewirings_used(&self) -> usize {
        self.rewirings
    }

    pub fn budget_left(&self) -> usize {
        self.cfg.max_rewiring_budget - self.rewirings
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn step(&mut self, action: RewiringAction) -> Result<EnvStep> {
        if self.done {
            return Err(CoreError::Parameter("episode is already done".into()));
        }
        match action {
            RewiringAction::Terminate => {
                self.done = true;
                let info = StepInfo { before: self.objective, after: self.objective };
                Ok(EnvStep { reward: 0.0, done: true, info })
            }
            RewiringAction::Rewire { .. } => {
                let next = apply_rewiring(&self.graph, action)?;
                if self.cfg.forbid_disconnecting && !next.is_connected() {
                    return Err(FeasibilityViolation::WouldDisconnect.into());
                }
                let after = objective_parts(&next, &self.cfg.objective)?;
                let info = StepInfo { before: self.objective, after };
                let reward = self.cfg.reward_scale * (after.combined - self.objective.combined);
                self.graph = next;
                self.objective = after;
                self.rewirings += 1;
                if self.rewirings >= self.cfg.max_rewiring_budget {
                    self.done = true;
                }
                Ok(EnvStep { reward, done: self.done, info })
            }
        }
    }

    /// Restores the initial graph and reopens the episode.
    pub fn reset(&mut self) {
        self.graph = self.initial.clone();
        self.objective = self.initial_objective;
        self.rewirings = 0;
        self.done = false;
    }
}
