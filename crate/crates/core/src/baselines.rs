//! Classical optimizers over the rewiring environment: hill climbing,
//! simulated annealing, greedy one-step argmax and a mutation-only
//! evolutionary search.
//!
//! All four respect the rewiring budget, report how many objective
//! evaluations they spent, emit a replayable rewiring sequence, and (except
//! greedy, which stops as soon as no step gains) stop early after
//! [`STALL_WINDOW`] consecutive candidate evaluations that fail to improve on
//! the best value seen so far.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::graph::{EdgeRef, Graph};
use crate::rewiring::{
    apply_rewiring, objective_parts, sample_uniform_rewiring, validate_rewiring, EnvConfig,
    RewiringAction,
};

/// Consecutive non-improving objective evaluations before a stochastic
/// optimizer gives up. The initial baseline evaluation is not counted.
pub const STALL_WINDOW: usize = 1000;

#[derive(Debug, Clone)]
pub struct OptimizerReport {
    pub best_graph: Graph,
    /// Rewirings that transform the input into `best_graph` when replayed.
    pub sequence: Vec<RewiringAction>,
    pub objective_initial: f64,
    pub objective_final: f64,
    pub gain_percent: f64,
    pub rewirings_used: usize,
    pub objective_evals: usize,
    /// Best objective seen after each candidate evaluation; length equals
    /// `objective_evals` and the sequence is non-decreasing.
    pub best_trace: Vec<f64>,
    pub wall_time_seconds: f64,
}

/// Relative objective gain in percent; signed infinity when the baseline is 0.
pub fn gain_percent(initial: f64, final_value: f64) -> f64 {
    let delta = final_value - initial;
    if initial != 0.0 {
        100.0 * delta / initial
    } else if delta == 0.0 {
        0.0
    } else if delta > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

fn assemble(
    best_graph: Graph,
    sequence: Vec<RewiringAction>,
    objective_initial: f64,
    objective_final: f64,
    objective_evals: usize,
    best_trace: Vec<f64>,
    started: Instant,
) -> OptimizerReport {
    debug_assert_eq!(best_trace.len(), objective_evals);
    OptimizerReport {
        rewirings_used: sequence.len(),
        best_graph,
        sequence,
        objective_initial,
        objective_final,
        gain_percent: gain_percent(objective_initial, objective_final),
        objective_evals,
        best_trace,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    }
}

/// Counts candidate evaluations and tracks the stall window against the best
/// value seen. Disconnecting candidates score negative infinity when the
/// config forbids them, so no acceptance rule can ever take one.
struct Evaluator<'a> {
    cfg: &'a EnvConfig,
    evals: usize,
    best_seen: f64,
    stalled: usize,
    best_trace: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(cfg: &'a EnvConfig, baseline: f64) -> Self {
        Self { cfg, evals: 0, best_seen: baseline, stalled: 0, best_trace: Vec::new() }
    }

    fn score(&self, g: &Graph) -> Result<f64> {
        let v = objective_parts(g, &self.cfg.objective)?.combined;
        if self.cfg.forbid_disconnecting && !g.is_connected() {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(v)
    }

    fn eval(&mut self, g: &Graph) -> Result<f64> {
        let v = self.score(g)?;
        self.evals += 1;
        if v > self.best_seen {
            self.best_seen = v;
            self.stalled = 0;
        } else {
            self.stalled += 1;
        }
        self.best_trace.push(self.best_seen);
        Ok(v)
    }

    fn stalled_out(&self) -> bool {
        self.stalled >= STALL_WINDOW
    }
}

/// Uniformly samples feasible rewirings, keeping each one only if it strictly
/// improves the objective.
pub fn hill_climb(g: &Graph, cfg: &EnvConfig, seed: u64) -> Result<OptimizerReport> {
    cfg.validate()?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial = objective_parts(g, &cfg.objective)?.combined;
    let mut ev = Evaluator::new(cfg, initial);
    let mut current = g.clone();
    let mut current_obj = initial;
    let mut sequence = Vec::new();
    while sequence.len() < cfg.max_rewiring_budget && !ev.stalled_out() {
        let Some((e1, e2)) = sample_uniform_rewiring(&current, &mut rng) else { break };
        let action = RewiringAction::Rewire { e1, e2 };
        let candidate = apply_rewiring(&current, action)?;
        let obj = ev.eval(&candidate)?;
        if obj > current_obj {
            current = candidate;
            current_obj = obj;
            sequence.push(action);
        }
    }
    Ok(assemble(current, sequence, initial, current_obj, ev.evals, ev.best_trace, started))
}

/// Metropolis acceptance rule: gains (and zero-gain moves) always pass, a
/// loss of `delta < 0` passes with probability exp(delta / temperature).
pub fn metropolis_accept<R: Rng>(delta: f64, temperature: f64, rng: &mut R) -> bool {
    if delta >= 0.0 {
        return true;
    }
    if temperature <= 0.0 {
        return false;
    }
    rng.gen::<f64>() < (delta / temperature).exp()
}

/// Default annealing schedule for a given starting objective:
/// T0 = 0.01 * |objective| (floored away from zero) and decay 0.995 per trial.
pub fn sa_default_params(initial_objective: f64) -> (f64, f64) {
    let t0 = 0.01 * initial_objective.abs();
    (if t0 > 0.0 { t0 } else { 1e-3 }, 0.995)
}

pub fn simulated_annealing(
    g: &Graph,
    cfg: &EnvConfig,
    seed: u64,
    t0: f64,
    decay: f64,
) -> Result<OptimizerReport> {
    cfg.validate()?;
    if !(t0 > 0.0) || !t0.is_finite() {
        return Err(CoreError::Parameter(format!("t0 must be positive and finite, got {t0}")));
    }
    if !(decay > 0.0 && decay < 1.0) {
        return Err(CoreError::Parameter(format!("decay must lie in (0, 1), got {decay}")));
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial = objective_parts(g, &cfg.objective)?.combined;
    let mut ev = Evaluator::new(cfg, initial);
    let mut current = g.clone();
    let mut current_obj = initial;
    let mut sequence = Vec::new();
    let mut best = current.clone();
    let mut best_obj = initial;
    let mut best_sequence = Vec::new();
    let mut temperature = t0;
    while sequence.len() < cfg.max_rewiring_budget && !ev.stalled_out() {
        let Some((e1, e2)) = sample_uniform_rewiring(&current, &mut rng) else { break };
        let action = RewiringAction::Rewire { e1, e2 };
        let candidate = apply_rewiring(&current, action)?;
        let obj = ev.eval(&candidate)?;
        if metropolis_accept(obj - current_obj, temperature, &mut rng) {
            current = candidate;
            current_obj = obj;
            sequence.push(action);
            if obj > best_obj {
                best = current.clone();
                best_obj = obj;
                best_sequence = sequence.clone();
            }
        }
        temperature *= decay;
    }
    Ok(assemble(best, best_sequence, initial, best_obj, ev.evals, ev.best_trace, started))
}

/// Wrapper using [`sa_default_params`].
pub fn simulated_annealing_default(g: &Graph, cfg: &EnvConfig, seed: u64) -> Result<OptimizerReport> {
    cfg.validate()?;
    let initial = objective_parts(g, &cfg.objective)?.combined;
    let (t0, decay) = sa_default_params(initial);
    simulated_annealing(g, cfg, seed, t0, decay)
}

/// Every feasible rewiring outcome exactly once, as its canonical
/// representative: e1 is the lexicographically smaller undirected edge in
/// `(min, max)` orientation, e2 carries the orientation that selects the
/// outcome. Enumeration order is ascending in the (A, C, B, D) tuple.
pub fn enumerate_rewirings(g: &Graph) -> Vec<(EdgeRef, EdgeRef)> {
    let edges = g.undirected_edges();
    let mut out = Vec::new();
    for i in 0..edges.len() {
        let (a, c) = edges[i];
        let e1 = EdgeRef::new(a, c);
        for &(b, d) in &edges[i + 1..] {
            for e2 in [EdgeRef::new(b, d), EdgeRef::new(d, b)] {
                if validate_rewiring(g, e1, e2).is_ok() {
                    out.push((e1, e2));
                }
            }
        }
    }
    out
}

/// Exhaustive one-step lookahead: applies the feasible rewiring with the
/// largest strictly positive gain until none exists or the budget is spent.
/// Deterministic; ties resolve to the smallest (A, C, B, D) tuple.
pub fn greedy(g: &Graph, cfg: &EnvConfig) -> Result<OptimizerReport> {
    cfg.validate()?;
    let started = Instant::now();
    let initial = objective_parts(g, &cfg.objective)?.combined;
    let ev = Evaluator::new(cfg, initial);
    let mut current = g.clone();
    let mut current_obj = initial;
    let mut sequence = Vec::new();
    let mut evals = 0usize;
    let mut best_trace = Vec::new();
    let mut running_best = initial;
    while sequence.len() < cfg.max_rewiring_budget {
        let candidates = enumerate_rewirings(&current);
        if candidates.is_empty() {
            break;
        }
        let scored: Result<Vec<f64>> = candidates
            .par_iter()
            .map(|&(e1, e2)| {
                let next = apply_rewiring(&current, RewiringAction::Rewire { e1, e2 })?;
                ev.score(&next)
            })
            .collect();
        let scored = scored?;
        evals += scored.len();
        for &v in &scored {
            if v > running_best {
                running_best = v;
            }
            best_trace.push(running_best);
        }
        let mut best_idx = usize::MAX;
        let mut best_val = f64::NEG_INFINITY;
        for (i, &v) in scored.iter().enumerate() {
            if v > best_val {
                best_val = v;
                best_idx = i;
            }
        }
        if best_idx == usize::MAX || best_val <= current_obj {
            break;
        }
        let (e1, e2) = candidates[best_idx];
        let action = RewiringAction::Rewire { e1, e2 };
        current = apply_rewiring(&current, action)?;
        current_obj = best_val;
        sequence.push(action);
    }
    Ok(assemble(current, sequence, initial, current_obj, evals, best_trace, started))
}

#[derive(Clone)]
struct Individual {
    graph: Graph,
    fitness: f64,
    sequence: Vec<RewiringAction>,
}

/// Mutation-only evolutionary search: tournament selection of size 2, one
/// elite survivor per generation, mutation = one uniformly random feasible
/// rewiring. An individual stops mutating once its rewiring distance from the
/// input reaches the budget.
pub fn evolutionary(
    g: &Graph,
    cfg: &EnvConfig,
    seed: u64,
    pop_size: usize,
    generations: usize,
) -> Result<OptimizerReport> {
    cfg.validate()?;
    if pop_size < 2 {
        return Err(CoreError::Parameter(format!("pop_size must be at least 2, got {pop_size}")));
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial = objective_parts(g, &cfg.objective)?.combined;
    let mut ev = Evaluator::new(cfg, initial);
    let seedling = Individual { graph: g.clone(), fitness: initial, sequence: Vec::new() };
    let mut best = seedling.clone();
    let mut population = vec![seedling; pop_size];
    'generations: for _ in 0..generations {
        let mut elite = 0;
        for (i, ind) in population.iter().enumerate() {
            if ind.fitness > population[elite].fitness {
                elite = i;
            }
        }
        let mut next = Vec::with_capacity(pop_size);
        next.push(population[elite].clone());
        let mut mutated_any = false;
        while next.len() < pop_size {
            let i = rng.gen_range(0..pop_size);
            let j = rng.gen_range(0..pop_size);
            let parent =
                if population[j].fitness > population[i].fitness { &population[j] } else { &population[i] };
            let mut child = parent.clone();
            if child.sequence.len() < cfg.max_rewiring_budget {
                if let Some((e1, e2)) = sample_uniform_rewiring(&child.graph, &mut rng) {
                    let action = RewiringAction::Rewire { e1, e2 };
                    child.graph = apply_rewiring(&child.graph, action)?;
                    child.sequence.push(action);
                    child.fitness = ev.eval(&child.graph)?;
                    mutated_any = true;
                }
            }
            if child.fitness > best.fitness {
                best = child.clone();
            }
            next.push(child);
            if ev.stalled_out() {
                break 'generations;
            }
        }
        population = next;
        if !mutated_any {
            break;
        }
    }
    Ok(assemble(best.graph, best.sequence, initial, best.fitness, ev.evals, ev.best_trace, started))
}
