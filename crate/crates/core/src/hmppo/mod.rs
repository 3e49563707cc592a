//! Hybrid multi-agent PPO: a Bernoulli placement actor, a squashed-Gaussian
//! retention actor and a centralised critic on the concatenated state.
//!
//! The same machinery also drives independent learners (one critic per
//! agent, each on its own state); see [`CriticLayout`].

mod agents;
mod buffer;
mod loss;
mod rollout;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use agents::{bandit_sanity, Agents, BanditReport, CriticLayout, UpdateStats};
pub use buffer::{gae, gae_bootstrapped, normalize, RolloutBuffer};
pub use loss::{actor_loss, clipped_surrogate, critic_grad, critic_loss};
#[cfg(test)]
pub(crate) use rollout::random_decision;
pub use rollout::{collect_rollout, evaluate, ActMode, EvalPolicy, EvalSummary, RolloutOutput};
pub use train::{train, train_with, LogRow, TrainOutput, TrainStatus, LOG_HEADER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    /// Parallel rollout workers; each contributes one episode per rollout.
    pub workers: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub total_steps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Base seed of the fixed evaluation episodes, shared by every run.
    pub eval_seed: u64,
    pub hidden: Vec<usize>,
    /// Initial log-std of the retention head, in pre-squash units.
    pub init_log_std: f64,
    pub normalize_advantages: bool,
    /// Multiplier applied to rewards before GAE and critic fitting.
    pub reward_scale: f64,
    /// Treat the end of an episode as a time limit and bootstrap from the
    /// critic there instead of from 0.
    pub bootstrap_time_limit: bool,
    /// Decay both learning rates linearly to 0 over `total_steps`.
    pub anneal_lr: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            actor_lr: 3e-4,
            critic_lr: 1e-3,
            epochs: 10,
            minibatch_size: 64,
            workers: 8,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            total_steps: 300_000,
            eval_interval: 500,
            eval_episodes: 20,
            eval_seed: 0x0000_E7A1_5EED,
            hidden: vec![64, 64],
            init_log_std: -5.0,
            normalize_advantages: true,
            reward_scale: 0.1,
            bootstrap_time_limit: true,
            anneal_lr: true,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")))
            }
        };
        unit("gamma", self.gamma)?;
        // lambda = 0 is the one-step TD special case
        if !(self.gae_lambda >= 0.0 && self.gae_lambda <= 1.0) {
            return Err(Error::Config(format!("gae_lambda must lie in [0, 1], got {}", self.gae_lambda)));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::Config(format!("clip_eps must lie in (0, 1), got {}", self.clip_eps)));
        }
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("value_coef", self.value_coef),
            ("max_grad_norm", self.max_grad_norm),
            ("reward_scale", self.reward_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(self.entropy_coef >= 0.0) {
            return Err(Error::Config("entropy_coef must be nonnegative".into()));
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("minibatch_size", self.minibatch_size),
            ("workers", self.workers),
            ("total_steps", self.total_steps),
            ("eval_interval", self.eval_interval),
            ("eval_episodes", self.eval_episodes),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.eval_interval > self.total_steps {
            return Err(Error::Config(format!(
                "eval_interval ({}) exceeds total_steps ({}); the run would log nothing",
                self.eval_interval, self.total_steps
            )));
        }
        if !(crate::nn::LOG_STD_MIN..=crate::nn::LOG_STD_MAX).contains(&self.init_log_std) {
            return Err(Error::Config(format!(
                "init_log_std must lie in [{}, {}], got {}",
                crate::nn::LOG_STD_MIN,
                crate::nn::LOG_STD_MAX,
                self.init_log_std
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        Ok(())
    }
}
