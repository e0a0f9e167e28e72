//! Autoregressive rewiring policy: termination head, two pointer heads over
//! directed-edge embeddings, and a value function on a separate encoder.

mod ppo;
mod train;

pub use ppo::{
    dual_clip_objective, gae_advantages, normalize_advantages, ppo_update, LossStats, PPOConfig,
    Transition,
};
pub use train::{train, TrainConfig, TrainOutcome, UpdateLog};

use rand::Rng;
use rewire_core::rewiring::{feasible_partners, EnvConfig, RewiringAction};
use rewire_core::{baselines, EdgeRef, Graph};

use crate::error::{NnError, Result};
use crate::firegnn::{encode, EmbeddingSet, FireGnnParams, EMBED_DIM};
use crate::tensor::{Linear, ParamSet, Tensor};

/// Two-layer perceptron with SeLU between the layers; the output is linear.
pub struct Mlp {
    pub l1: Linear,
    pub l2: Linear,
}

impl Mlp {
    fn new<R: Rng>(d_in: usize, d_hidden: usize, d_out: usize, rng: &mut R) -> Mlp {
        Mlp {
            l1: Linear::new(d_in, d_hidden, rng),
            l2: Linear::new(d_hidden, d_out, rng),
        }
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.l2.forward(&self.l1.forward(x)?.selu())
    }

    fn register(&self, params: &mut ParamSet, name: &str) {
        self.l1.register(params, &format!("{name}/l1"));
        self.l2.register(params, &format!("{name}/l2"));
    }
}

/// Additive-attention pointer: score(e) = v' tanh(W1 l + W2 h(e)).
pub struct Pointer {
    pub w_query: Tensor,
    pub w_key: Tensor,
    pub v: Tensor,
}

impl Pointer {
    fn new<R: Rng>(rng: &mut R) -> Pointer {
        let bound = 1.0 / (EMBED_DIM as f64).sqrt();
        Pointer {
            w_query: Tensor::parameter_uniform(EMBED_DIM, EMBED_DIM, bound, rng),
            w_key: Tensor::parameter_uniform(EMBED_DIM, EMBED_DIM, bound, rng),
            v: Tensor::parameter_uniform(EMBED_DIM, 1, bound, rng),
        }
    }

    /// Scores for every directed edge: `(E, 1)`.
    fn scores(&self, query: &Tensor, edge_emb: &Tensor) -> Result<Tensor> {
        let q = query.matmul(&self.w_query)?;
        let keys = edge_emb.matmul(&self.w_key)?;
        keys.add(&q)?.tanh().matmul(&self.v)
    }

    fn register(&self, params: &mut ParamSet, name: &str) {
        params.register(&format!("{name}/w_query"), &self.w_query);
        params.register(&format!("{name}/w_key"), &self.w_key);
        params.register(&format!("{name}/v"), &self.v);
    }
}

/// One-hot encoding of the termination decision fed to the lower heads.
fn continue_one_hot() -> Tensor {
    Tensor::from_vec(1, 2, vec![0.0, 1.0]).expect("constant shape")
}

/// All trainable state: policy and value use separate encoders of identical
/// architecture.
pub struct PolicyParams {
    /// Filtration order both encoders run with.
    pub k: usize,
    pub policy_encoder: FireGnnParams,
    pub value_encoder: FireGnnParams,
    /// Termination head 64 -> 64 -> 1 (sigmoid applied outside).
    pub pi0: Mlp,
    /// First-edge query head [h(G) ‖ l_c] 66 -> 64 -> 64.
    pub pi1: Mlp,
    /// Second-edge query head [h(G) ‖ h(e1) ‖ l_c] 130 -> 64 -> 64.
    pub pi2: Mlp,
    pub pointer1: Pointer,
    pub pointer2: Pointer,
    /// Value head 64 -> 64 -> 1 on the value encoder's graph embedding.
    pub value_head: Mlp,
}

impl PolicyParams {
    pub fn new<R: Rng>(k: usize, rng: &mut R) -> PolicyParams {
        PolicyParams {
            k,
            policy_encoder: FireGnnParams::new(rng),
            value_encoder: FireGnnParams::new(rng),
            pi0: Mlp::new(EMBED_DIM, EMBED_DIM, 1, rng),
            pi1: Mlp::new(EMBED_DIM + 2, EMBED_DIM, EMBED_DIM, rng),
            pi2: Mlp::new(2 * EMBED_DIM + 2, EMBED_DIM, EMBED_DIM, rng),
            pointer1: Pointer::new(rng),
            pointer2: Pointer::new(rng),
            value_head: Mlp::new(EMBED_DIM, EMBED_DIM, 1, rng),
        }
    }

    /// Parameters updated by the policy optimizer.
    pub fn policy_param_set(&self) -> ParamSet {
        let mut set = ParamSet::new();
        set.extend_prefixed("encoder", &self.policy_encoder.param_set());
        self.pi0.register(&mut set, "pi0");
        self.pi1.register(&mut set, "pi1");
        self.pi2.register(&mut set, "pi2");
        self.pointer1.register(&mut set, "pointer1");
        self.pointer2.register(&mut set, "pointer2");
        set
    }

    /// Parameters updated by the value optimizer.
    pub fn value_param_set(&self) -> ParamSet {
        let mut set = ParamSet::new();
        set.extend_prefixed("encoder", &self.value_encoder.param_set());
        self.value_head.register(&mut set, "head");
        set
    }

    /// Everything, prefixed, for checkpoints.
    pub fn all_params(&self) -> ParamSet {
        let mut set = ParamSet::new();
        set.extend_prefixed("policy", &self.policy_param_set());
        set.extend_prefixed("value", &self.value_param_set());
        set
    }
}

/// What a trajectory stores to replay one action's log-probability.
/// The first edge is recorded pre-flip together with the coin outcome; the
/// uniform orientation flip contributes a constant factor that cancels in
/// likelihood ratios, so it is not part of the log-probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionReplay {
    Terminate {
        forced: bool,
    },
    Rewire {
        /// Index of the sampled first edge (before the orientation flip) in
        /// the canonical directed-edge list.
        e1_index: usize,
        flipped: bool,
        /// Index of the sampled partner edge.
        e2_index: usize,
    },
}

/// Policy-side forward pass on one graph, reused by sampling, greedy
/// decoding, exact enumeration, and log-probability recomputation.
pub struct PolicyForward {
    pub embeddings: EmbeddingSet,
    pub graph_embedding: Tensor,
    /// Termination logit (1x1); P(terminate) = sigmoid.
    pub termination_logit: Tensor,
    /// Eligibility of each directed edge as a first pick.
    pub eligible: Vec<bool>,
    /// First-head scores `(E, 1)`; None when no edge is eligible.
    first_scores: Option<Tensor>,
    first_probs: Option<Vec<f64>>,
}

impl PolicyForward {
    pub fn new(params: &PolicyParams, g: &Graph) -> Result<PolicyForward> {
        let embeddings = encode(&params.policy_encoder, g, params.k)?;
        let graph_embedding = embeddings.graph.clone();
        let termination_logit = params.pi0.forward(&graph_embedding)?;
        let eligible: Vec<bool> = embeddings
            .directed_edges
            .iter()
            .map(|&e| !feasible_partners(g, e).is_empty())
            .collect();
        let (first_scores, first_probs) = if eligible.iter().any(|&e| e) {
            let l1 = params
                .pi1
                .forward(&Tensor::concat_cols(&[
                    graph_embedding.clone(),
                    continue_one_hot(),
                ])?)?;
            let scores = params.pointer1.scores(&l1, &embeddings.edge)?;
            let probs = scores.masked_softmax(&eligible)?.value();
            (Some(scores), Some(probs))
        } else {
            (None, None)
        };
        Ok(PolicyForward {
            embeddings,
            graph_embedding,
            termination_logit,
            eligible,
            first_scores,
            first_probs,
        })
    }

    pub fn p_terminate(&self) -> f64 {
        sigmoid(self.termination_logit.item())
    }

    /// True when no directed edge has a feasible partner.
    pub fn forced_terminate(&self) -> bool {
        self.first_scores.is_none()
    }

    /// First-head probabilities over the canonical directed-edge list
    /// (zeros on ineligible entries).
    pub fn first_probs(&self) -> Option<&[f64]> {
        self.first_probs.as_deref()
    }

    pub fn directed_edges(&self) -> &[EdgeRef] {
        &self.embeddings.directed_edges
    }

    /// Index of the opposite orientation of directed edge `idx`.
    pub fn reversed_index(&self, idx: usize) -> usize {
        let e = self.embeddings.directed_edges[idx];
        self.embeddings
            .directed_edges
            .iter()
            .position(|f| f.tail == e.head && f.head == e.tail)
            .expect("both orientations are present in the canonical list")
    }

    fn second_scores(
        &self,
        params: &PolicyParams,
        g: &Graph,
        exec_index: usize,
    ) -> Result<(Tensor, Vec<bool>)> {
        let e1 = self.embeddings.directed_edges[exec_index];
        let partners = feasible_partners(g, e1);
        if partners.is_empty() {
            return Err(NnError::Contract(format!(
                "edge {e1} has no feasible partners"
            )));
        }
        let mut mask = vec![false; self.embeddings.directed_edges.len()];
        for p in partners {
            let idx = self
                .embeddings
                .directed_edges
                .iter()
                .position(|&f| f == p)
                .expect("partner is a directed edge of the same graph");
            mask[idx] = true;
        }
        let h_e1 = self.embeddings.edge.gather_rows(&[exec_index])?;
        let l2 = params.pi2.forward(&Tensor::concat_cols(&[
            self.graph_embedding.clone(),
            h_e1,
            continue_one_hot(),
        ])?)?;
        let scores = params.pointer2.scores(&l2, &self.embeddings.edge)?;
        Ok((scores, mask))
    }

    /// Second-head probabilities conditioned on the executed first edge,
    /// over the canonical directed-edge list (zeros outside the partner set).
    pub fn second_probs(
        &self,
        params: &PolicyParams,
        g: &Graph,
        exec_index: usize,
    ) -> Result<Vec<f64>> {
        let (scores, mask) = self.second_scores(params, g, exec_index)?;
        Ok(scores.masked_softmax(&mask)?.value())
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// ln sigmoid(z) computed stably.
fn log_sigmoid(z: f64) -> f64 {
    -softplus(-z)
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let draw: f64 = rng.gen::<f64>();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if draw < acc {
                return i;
            }
        }
    }
    last_positive
}

fn argmax_index(probs: &[f64]) -> usize {
    let mut best = 0;
    let mut best_p = f64::NEG_INFINITY;
    for (i, &p) in probs.iter().enumerate() {
        if p > best_p {
            best = i;
            best_p = p;
        }
    }
    best
}

/// A sampled (or decoded) decision with everything needed for training.
pub struct SampledAction {
    pub action: RewiringAction,
    pub replay: ActionReplay,
    pub log_prob: f64,
    pub value: f64,
}

/// Value estimate for a state, differentiable through the value parameters.
pub fn value_forward(params: &PolicyParams, g: &Graph) -> Result<Tensor> {
    let emb = encode(&params.value_encoder, g, params.k)?;
    params.value_head.forward(&emb.graph)
}

/// Sample the three-head action. The first edge is drawn from the pointer
/// softmax over eligible directed edges, then its orientation is re-randomized
/// with probability 1/2; the partner edge is drawn from the feasible-partner
/// softmax conditioned on the executed orientation.
pub fn sample_action<R: Rng>(
    params: &PolicyParams,
    g: &Graph,
    rng: &mut R,
) -> Result<SampledAction> {
    let fwd = PolicyForward::new(params, g)?;
    let value = value_forward(params, g)?.item();
    let z = fwd.termination_logit.item();
    if fwd.forced_terminate() {
        return Ok(SampledAction {
            action: RewiringAction::Terminate,
            replay: ActionReplay::Terminate { forced: true },
            log_prob: log_sigmoid(z),
            value,
        });
    }
    if rng.gen_bool(fwd.p_terminate()) {
        return Ok(SampledAction {
            action: RewiringAction::Terminate,
            replay: ActionReplay::Terminate { forced: false },
            log_prob: log_sigmoid(z),
            value,
        });
    }
    let p1 = fwd.first_probs().expect("eligible edges exist");
    let e1_index = sample_index(p1, rng);
    let flipped = rng.gen_bool(0.5);
    let exec_index = if flipped {
        fwd.reversed_index(e1_index)
    } else {
        e1_index
    };
    let p2 = fwd.second_probs(params, g, exec_index)?;
    let e2_index = sample_index(&p2, rng);
    let action = RewiringAction::Rewire {
        e1: fwd.directed_edges()[exec_index],
        e2: fwd.directed_edges()[e2_index],
    };
    let log_prob = log_sigmoid(-z) + p1[e1_index].ln() + p2[e2_index].ln();
    Ok(SampledAction {
        action,
        replay: ActionReplay::Rewire {
            e1_index,
            flipped,
            e2_index,
        },
        log_prob,
        value,
    })
}

/// Greedy argmax decoding of one action (deterministic, no orientation flip:
/// the pointer scores both orientations, so the argmax picks one directly).
/// Terminates when P(terminate) >= 1/2 or nothing is eligible.
pub fn decode_action(params: &PolicyParams, g: &Graph) -> Result<RewiringAction> {
    let fwd = PolicyForward::new(params, g)?;
    if fwd.forced_terminate() || fwd.p_terminate() >= 0.5 {
        return Ok(RewiringAction::Terminate);
    }
    let p1 = fwd.first_probs().expect("eligible edges exist");
    let e1_index = argmax_index(p1);
    let p2 = fwd.second_probs(params, g, e1_index)?;
    let e2_index = argmax_index(&p2);
    Ok(RewiringAction::Rewire {
        e1: fwd.directed_edges()[e1_index],
        e2: fwd.directed_edges()[e2_index],
    })
}

/// Differentiable log-probability and entropy of a stored decision,
/// recomputed from the snapshot graph under the current parameters.
pub fn recompute_log_prob(
    params: &PolicyParams,
    g: &Graph,
    replay: ActionReplay,
) -> Result<(Tensor, Tensor)> {
    let fwd = PolicyForward::new(params, g)?;
    let z = &fwd.termination_logit;
    // Bernoulli entropy: p softplus(-z) + (1-p) softplus(z).
    let p = z.sigmoid();
    let one_minus_p = p.neg().add_scalar(1.0);
    let bernoulli_entropy = p
        .mul(&z.neg().softplus())?
        .add(&one_minus_p.mul(&z.softplus())?)?;
    match replay {
        ActionReplay::Terminate { forced } => {
            // log P(terminate) = log sigmoid(z) = -softplus(-z).
            let log_prob = z.neg().softplus().neg();
            let entropy = if forced {
                Tensor::scalar(0.0)
            } else {
                bernoulli_entropy
            };
            Ok((log_prob, entropy))
        }
        ActionReplay::Rewire {
            e1_index,
            flipped,
            e2_index,
        } => {
            let scores1 = fwd
                .first_scores
                .as_ref()
                .ok_or_else(|| {
                    NnError::Contract("stored rewiring but no edge is eligible".into())
                })?
                .clone();
            // log P(continue) = -softplus(z).
            let log_continue = z.softplus().neg();
            let log_p1 = scores1.masked_log_softmax_select(&fwd.eligible, e1_index)?;
            let exec_index = if flipped {
                fwd.reversed_index(e1_index)
            } else {
                e1_index
            };
            let (scores2, mask2) = fwd.second_scores(params, g, exec_index)?;
            let log_p2 = scores2.masked_log_softmax_select(&mask2, e2_index)?;
            let log_prob = log_continue.add(&log_p1)?.add(&log_p2)?;
            let probs1 = scores1.masked_softmax(&fwd.eligible)?;
            let probs2 = scores2.masked_softmax(&mask2)?;
            let entropy = bernoulli_entropy
                .add(&probs1.entropy_of_masked_probs(&fwd.eligible)?)?
                .add(&probs2.entropy_of_masked_probs(&mask2)?)?;
            Ok((log_prob, entropy))
        }
    }
}

/// Greedy-decoded rollout reported like a classical optimizer run.
pub fn evaluate_policy(
    params: &PolicyParams,
    g: &Graph,
    cfg: &EnvConfig,
) -> Result<baselines::OptimizerReport> {
    let start = std::time::Instant::now();
    let mut env = rewire_core::rewiring::Env::new(g.clone(), cfg.clone())?;
    let mut sequence = Vec::new();
    let mut best_trace = Vec::new();
    let mut running_best = env.initial_objective().combined;
    while !env.is_done() {
        let action = decode_action(params, env.graph())?;
        if action == RewiringAction::Terminate {
            break;
        }
        env.step(action)?;
        sequence.push(action);
        running_best = running_best.max(env.objective().combined);
        best_trace.push(running_best);
    }
    let initial = env.initial_objective().combined;
    let final_objective = env.objective().combined;
    Ok(baselines::OptimizerReport {
        best_graph: env.graph().clone(),
        rewirings_used: sequence.len(),
        objective_evals: sequence.len(),
        sequence,
        objective_initial: initial,
        objective_final: final_objective,
        gain_percent: baselines::gain_percent(initial, final_objective),
        best_trace,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Count how many steps of a rewiring sequence exactly undo the previous step
/// (the anti-infinite-loop metric): step t+1 is an undo when the graph after
/// it equals the graph before step t. Terminate entries end the scan.
pub fn count_undo_steps(initial: &Graph, sequence: &[RewiringAction]) -> Result<usize> {
    let mut previous = initial.clone();
    let mut current = initial.clone();
    let mut undos = 0;
    for (i, &action) in sequence.iter().enumerate() {
        if action == RewiringAction::Terminate {
            break;
        }
        let next = rewire_core::rewiring::apply_rewiring(&current, action)?;
        if i > 0 && next == previous {
            undos += 1;
        }
        previous = current;
        current = next;
    }
    Ok(undos)
}

/// Mean greedy-decoded gain per graph-size bucket, for inductive evaluation
/// across a generated test set.
pub fn evaluate_by_size(
    params: &PolicyParams,
    graphs: &[Graph],
    cfg: &EnvConfig,
) -> Result<Vec<(usize, f64, usize)>> {
    use std::collections::BTreeMap;
    let mut buckets: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for g in graphs {
        let report = evaluate_policy(params, g, cfg)?;
        let entry = buckets.entry(g.node_count()).or_insert((0.0, 0));
        entry.0 += report.objective_final - report.objective_initial;
        entry.1 += 1;
    }
    Ok(buckets
        .into_iter()
        .map(|(size, (total, count))| (size, total / count as f64, count))
        .collect())
}
