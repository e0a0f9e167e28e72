//! Dual-clip PPO loss, generalized advantage estimation, and one update step.

use rewire_core::Graph;

use crate::adam::Adam;
use crate::error::{NnError, Result};
use crate::tensor::{ParamSet, Tensor};

use super::{recompute_log_prob, value_forward, ActionReplay, PolicyParams};

#[derive(Debug, Clone)]
pub struct PPOConfig {
    pub clip_eps: f64,
    /// Lower-bound multiplier for negative-advantage samples.
    pub dual_clip: f64,
    pub gae_lambda: f64,
    pub gamma: f64,
    /// Transitions collected per update (rounded up to a multiple of num_envs).
    pub batch: usize,
    /// Initial learning rate; decays linearly to zero over training.
    pub lr: f64,
    pub epochs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub num_envs: usize,
}

impl Default for PPOConfig {
    fn default() -> Self {
        PPOConfig {
            clip_eps: 0.2,
            dual_clip: 10.0,
            gae_lambda: 0.95,
            gamma: 1.0,
            batch: 256,
            lr: 7e-4,
            epochs: 3,
            value_coef: 0.5,
            entropy_coef: 0.01,
            num_envs: 8,
        }
    }
}

impl PPOConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(NnError::Contract(format!(
                "clip_eps must be in (0,1), got {}",
                self.clip_eps
            )));
        }
        if !(self.dual_clip > 1.0) {
            return Err(NnError::Contract(format!(
                "dual_clip must exceed 1, got {}",
                self.dual_clip
            )));
        }
        if self.batch == 0 || self.epochs == 0 || self.num_envs == 0 {
            return Err(NnError::Contract(
                "batch, epochs, and num_envs must all be positive".into(),
            ));
        }
        for (name, v) in [("gae_lambda", self.gae_lambda), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(NnError::Contract(format!("{name} must be in [0,1], got {v}")));
            }
        }
        if !(self.lr > 0.0) || !(self.value_coef >= 0.0) || !(self.entropy_coef >= 0.0) {
            return Err(NnError::Contract(
                "lr must be positive; value and entropy coefficients non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// GAE over one environment stream. `dones[t]` marks episode termination at
/// step t; `bootstrap` is the value estimate of the state after the final
/// step, used only when the stream was cut mid-episode. Returns per-step
/// advantages and value targets (advantage + value).
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n);
    assert_eq!(dones.len(), n);
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if dones[t] {
            0.0
        } else if t + 1 == n {
            bootstrap
        } else {
            values[t + 1]
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * if dones[t] { 0.0 } else { running };
        advantages[t] = running;
    }
    let returns = advantages
        .iter()
        .zip(values)
        .map(|(a, v)| a + v)
        .collect();
    (advantages, returns)
}

/// In-place normalization to zero mean, unit standard deviation. Left
/// mean-centered only when the spread is degenerate.
pub fn normalize_advantages(advantages: &mut [f64]) {
    if advantages.is_empty() {
        return;
    }
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    for a in advantages.iter_mut() {
        *a -= mean;
    }
    let std = (advantages.iter().map(|a| a * a).sum::<f64>() / n).sqrt();
    if std > 1e-12 {
        for a in advantages.iter_mut() {
            *a /= std;
        }
    }
}

/// Per-sample dual-clip surrogate (the quantity to maximize): for advantage
/// A >= 0 the standard clipped objective min(rA, clip(r)A); for A < 0 it is
/// additionally bounded below by dual_clip * A.
pub fn dual_clip_objective(ratio: &Tensor, advantage: f64, cfg: &PPOConfig) -> Result<Tensor> {
    let adv = Tensor::scalar(advantage);
    let unclipped = ratio.mul(&adv)?;
    let clipped = ratio
        .clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
        .mul(&adv)?;
    let pessimistic = unclipped.minimum(&clipped)?;
    if advantage < 0.0 {
        pessimistic.maximum(&Tensor::scalar(cfg.dual_clip * advantage))
    } else {
        Ok(pessimistic)
    }
}

/// One transition of a rollout, with its snapshot graph for replay.
#[derive(Debug, Clone)]
pub struct Transition {
    pub graph: Graph,
    pub replay: ActionReplay,
    pub old_log_prob: f64,
    /// Scaled reward as emitted by the environment.
    pub reward: f64,
    pub done: bool,
    /// Rollout-time value estimate (scaled-return space).
    pub value: f64,
    /// Normalized GAE advantage, filled in before the update.
    pub advantage: f64,
    /// Value target (scaled-return space).
    pub ret: f64,
}

/// Mean loss components over one update pass.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossStats {
    /// Mean negated surrogate (entropy bonus excluded).
    pub policy_loss: f64,
    /// Mean squared value error (coefficient excluded).
    pub value_loss: f64,
    /// Mean sampled-path entropy.
    pub entropy: f64,
}

/// One epoch over the batch: accumulate per-sample gradients for both
/// parameter sets, then apply one Adam step to each. Optimizer learning
/// rates are managed by the caller.
pub fn ppo_update(
    params: &PolicyParams,
    batch: &[Transition],
    cfg: &PPOConfig,
    policy_set: &ParamSet,
    value_set: &ParamSet,
    policy_opt: &mut Adam,
    value_opt: &mut Adam,
) -> Result<LossStats> {
    if batch.is_empty() {
        return Err(NnError::Contract("ppo_update on an empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    policy_set.zero_grad();
    value_set.zero_grad();
    let mut stats = LossStats::default();
    for (i, t) in batch.iter().enumerate() {
        let (log_prob, entropy) = recompute_log_prob(params, &t.graph, t.replay)?;
        let ratio = log_prob.add_scalar(-t.old_log_prob).exp();
        let surrogate = dual_clip_objective(&ratio, t.advantage, cfg)?;
        let policy_loss = surrogate
            .neg()
            .add(&entropy.scale(-cfg.entropy_coef))?;
        let value = value_forward(params, &t.graph)?;
        let value_err = value.add_scalar(-t.ret);
        let value_loss = value_err.mul(&value_err)?;
        let diagnostics = [
            ("log_prob", log_prob.item()),
            ("ratio", ratio.item()),
            ("surrogate", surrogate.item()),
            ("entropy", entropy.item()),
            ("value", value.item()),
            ("value_loss", value_loss.item()),
        ];
        if diagnostics.iter().any(|(_, v)| !v.is_finite()) {
            let dump: Vec<String> = diagnostics
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            return Err(NnError::Training(format!(
                "non-finite loss at sample {i}: {} (old_log_prob={}, advantage={}, return={})",
                dump.join(", "),
                t.old_log_prob,
                t.advantage,
                t.ret
            )));
        }
        policy_loss.scale(scale).backward()?;
        value_loss.scale(cfg.value_coef * scale).backward()?;
        stats.policy_loss += -surrogate.item() * scale;
        stats.value_loss += value_loss.item() * scale;
        stats.entropy += entropy.item() * scale;
    }
    policy_opt.step(policy_set)?;
    value_opt.step(value_set)?;
    Ok(stats)
}
