//! Synchronous PPO training loop over lockstep environment instances.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rewire_core::rewiring::{Env, EnvConfig};
use rewire_core::Graph;

use crate::adam::{linear_decay_lr, Adam};
use crate::checkpoint::save_checkpoint;
use crate::error::{NnError, Result};

use super::ppo::{
    gae_advantages, normalize_advantages, ppo_update, LossStats, PPOConfig, Transition,
};
use super::{evaluate_policy, sample_action, value_forward, PolicyParams};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Environment steps to collect in total (rounded down to whole updates).
    pub total_steps: usize,
    pub seed: u64,
    /// Filtration order for both encoders.
    pub k: usize,
    /// Greedy evaluation cadence in updates; the final update always evaluates.
    pub eval_every: usize,
    /// Training log CSV destination.
    pub log_path: Option<PathBuf>,
    /// Stem for best-evaluation checkpoints (writes stem.json + stem.bin).
    pub checkpoint_stem: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_steps: 20_000,
            seed: 0,
            k: 1,
            eval_every: 5,
            log_path: None,
            checkpoint_stem: None,
        }
    }
}

/// One CSV row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateLog {
    pub update: usize,
    /// Mean unscaled objective gain over episodes completed this update.
    pub mean_gain: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

pub struct TrainOutcome {
    /// Parameters of the best-evaluation policy (falls back to final).
    pub params: PolicyParams,
    pub log: Vec<UpdateLog>,
    /// (update, greedy-decoded objective gain on the first training graph).
    pub eval_history: Vec<(usize, f64)>,
    pub best_eval_gain: f64,
    pub env_steps: usize,
}

fn write_log_csv(path: &PathBuf, log: &[UpdateLog]) -> Result<()> {
    let mut out = String::from("update,mean_gain,policy_loss,value_loss,entropy\n");
    for row in log {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.update, row.mean_gain, row.policy_loss, row.value_loss, row.entropy
        ));
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Train a fresh policy on the given graphs (environments cycle through them).
/// Rollouts, updates, and evaluations are fully sequential and seeded, so a
/// given (inputs, seed) pair reproduces bit-identical logs.
pub fn train(
    graphs: &[Graph],
    env_cfg: &EnvConfig,
    ppo_cfg: &PPOConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if graphs.is_empty() {
        return Err(NnError::Contract("train requires at least one graph".into()));
    }
    env_cfg.validate().map_err(NnError::from)?;
    ppo_cfg.validate()?;
    let steps_per_env = ppo_cfg.batch.div_ceil(ppo_cfg.num_envs);
    let batch_size = steps_per_env * ppo_cfg.num_envs;
    let updates = (train_cfg.total_steps / batch_size).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let params = PolicyParams::new(train_cfg.k, &mut rng);
    let policy_set = params.policy_param_set();
    let value_set = params.value_param_set();
    let all_set = params.all_params();
    let mut policy_opt = Adam::new(&policy_set, ppo_cfg.lr);
    let mut value_opt = Adam::new(&value_set, ppo_cfg.lr);

    let mut envs: Vec<Env> = (0..ppo_cfg.num_envs)
        .map(|i| Env::new(graphs[i % graphs.len()].clone(), env_cfg.clone()))
        .collect::<std::result::Result<_, rewire_core::CoreError>>()?;
    let mut episode_reward_acc = vec![0.0; ppo_cfg.num_envs];

    let mut log = Vec::with_capacity(updates);
    let mut eval_history = Vec::new();
    let mut best_eval_gain = f64::NEG_INFINITY;
    let mut best_values: Option<Vec<f64>> = None;

    for update in 0..updates {
        // Rollout: env-major lockstep so streams interleave deterministically.
        let mut transitions: Vec<Transition> = Vec::with_capacity(batch_size);
        let mut completed_gains: Vec<f64> = Vec::new();
        for _ in 0..steps_per_env {
            for (e, env) in envs.iter_mut().enumerate() {
                let snapshot = env.graph().clone();
                let sampled = sample_action(&params, &snapshot, &mut rng)?;
                let step = env.step(sampled.action)?;
                episode_reward_acc[e] += step.reward;
                if step.done {
                    completed_gains.push(episode_reward_acc[e] / env.cfg().reward_scale);
                    episode_reward_acc[e] = 0.0;
                }
                transitions.push(Transition {
                    graph: snapshot,
                    replay: sampled.replay,
                    old_log_prob: sampled.log_prob,
                    reward: step.reward,
                    done: step.done,
                    value: sampled.value,
                    advantage: 0.0,
                    ret: 0.0,
                });
                if step.done {
                    env.reset();
                }
            }
        }

        // Per-stream GAE with a bootstrap only for streams cut mid-episode.
        let stride = ppo_cfg.num_envs;
        for e in 0..stride {
            let idx: Vec<usize> = (0..steps_per_env).map(|t| t * stride + e).collect();
            let rewards: Vec<f64> = idx.iter().map(|&i| transitions[i].reward).collect();
            let values: Vec<f64> = idx.iter().map(|&i| transitions[i].value).collect();
            let dones: Vec<bool> = idx.iter().map(|&i| transitions[i].done).collect();
            let bootstrap = if *dones.last().unwrap() {
                0.0
            } else {
                value_forward(&params, envs[e].graph())?.item()
            };
            let (adv, ret) = gae_advantages(
                &rewards,
                &values,
                &dones,
                bootstrap,
                ppo_cfg.gamma,
                ppo_cfg.gae_lambda,
            );
            for (k, &i) in idx.iter().enumerate() {
                transitions[i].advantage = adv[k];
                transitions[i].ret = ret[k];
            }
        }
        let mut advantages: Vec<f64> = transitions.iter().map(|t| t.advantage).collect();
        normalize_advantages(&mut advantages);
        for (t, a) in transitions.iter_mut().zip(&advantages) {
            t.advantage = *a;
        }

        let lr = linear_decay_lr(ppo_cfg.lr, update as f64 / updates as f64);
        policy_opt.lr = lr;
        value_opt.lr = lr;
        let mut stats = LossStats::default();
        for _ in 0..ppo_cfg.epochs {
            let epoch_stats = ppo_update(
                &params,
                &transitions,
                ppo_cfg,
                &policy_set,
                &value_set,
                &mut policy_opt,
                &mut value_opt,
            )?;
            stats.policy_loss += epoch_stats.policy_loss / ppo_cfg.epochs as f64;
            stats.value_loss += epoch_stats.value_loss / ppo_cfg.epochs as f64;
            stats.entropy += epoch_stats.entropy / ppo_cfg.epochs as f64;
        }

        let mean_gain = if completed_gains.is_empty() {
            0.0
        } else {
            completed_gains.iter().sum::<f64>() / completed_gains.len() as f64
        };
        log.push(UpdateLog {
            update,
            mean_gain,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
        });

        let is_last = update + 1 == updates;
        let due = train_cfg.eval_every > 0 && (update + 1) % train_cfg.eval_every == 0;
        if due || is_last {
            let report = evaluate_policy(&params, &graphs[0], env_cfg)?;
            let gain = report.objective_final - report.objective_initial;
            eval_history.push((update, gain));
            if gain > best_eval_gain {
                best_eval_gain = gain;
                best_values = Some(all_set.flat_values());
                if let Some(stem) = &train_cfg.checkpoint_stem {
                    save_checkpoint(stem, &all_set)?;
                }
            }
        }
    }

    if let Some(values) = best_values {
        all_set.set_flat_values(&values)?;
    }
    if let Some(path) = &train_cfg.log_path {
        write_log_csv(path, &log)?;
    }
    Ok(TrainOutcome {
        params,
        log,
        eval_history,
        best_eval_gain,
        env_steps: updates * batch_size,
    })
}
