use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agents::{Agents, CriticLayout, UpdateStats};
use super::rollout::{collect_rollout, evaluate, ActMode, EvalPolicy, EvalSummary};
use super::HyperParams;
use crate::env::fmt_sig9;
use crate::error::{Error, Result};
use crate::sysmodel::SystemConfig;

pub const LOG_HEADER: &str = "env_steps,eval_reward_mean,eval_reward_std,total_delay_min,mean_perplexity,\
emulator_switches,actor1_loss,actor2_loss,critic_loss,entropy1,entropy2";

/// One evaluation record of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub env_steps: usize,
    pub eval_reward_mean: f64,
    pub eval_reward_std: f64,
    pub total_delay_min: f64,
    pub mean_perplexity: f64,
    pub emulator_switches: f64,
    pub actor1_loss: f64,
    pub actor2_loss: f64,
    pub critic_loss: f64,
    pub entropy1: f64,
    pub entropy2: f64,
}

impl LogRow {
    pub fn new(env_steps: usize, eval: &EvalSummary, stats: &UpdateStats) -> Self {
        Self {
            env_steps,
            eval_reward_mean: eval.reward_mean,
            eval_reward_std: eval.reward_std,
            total_delay_min: eval.total_delay_min,
            mean_perplexity: eval.mean_perplexity,
            emulator_switches: eval.switches,
            actor1_loss: stats.actor1_loss,
            actor2_loss: stats.actor2_loss,
            critic_loss: stats.critic_loss,
            entropy1: stats.entropy1,
            entropy2: stats.entropy2,
        }
    }

    pub fn to_csv(&self) -> String {
        let vals = [
            self.eval_reward_mean,
            self.eval_reward_std,
            self.total_delay_min,
            self.mean_perplexity,
            self.emulator_switches,
            self.actor1_loss,
            self.actor2_loss,
            self.critic_loss,
            self.entropy1,
            self.entropy2,
        ];
        let mut s = self.env_steps.to_string();
        for v in vals {
            s.push(',');
            s.push_str(&fmt_sig9(v));
        }
        s
    }

    pub fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 11 {
            return None;
        }
        let v = |i: usize| f[i].parse::<f64>().ok();
        Some(Self {
            env_steps: f[0].parse().ok()?,
            eval_reward_mean: v(1)?,
            eval_reward_std: v(2)?,
            total_delay_min: v(3)?,
            mean_perplexity: v(4)?,
            emulator_switches: v(5)?,
            actor1_loss: v(6)?,
            actor2_loss: v(7)?,
            critic_loss: v(8)?,
            entropy1: v(9)?,
            entropy2: v(10)?,
        })
    }

    pub fn is_finite(&self) -> bool {
        [
            self.eval_reward_mean,
            self.eval_reward_std,
            self.total_delay_min,
            self.mean_perplexity,
            self.emulator_switches,
            self.actor1_loss,
            self.actor2_loss,
            self.critic_loss,
            self.entropy1,
            self.entropy2,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainStatus {
    Completed,
    /// Training stopped on a non-finite update or metric; parameters are the
    /// last good ones.
    Aborted(String),
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub log: Vec<LogRow>,
    /// `None` for policies without parameters.
    pub agents: Option<Agents>,
    /// The most recent logged evaluation, with its per-step trace.
    pub final_eval: EvalSummary,
    pub env_steps: usize,
    pub status: TrainStatus,
    pub rng: ChaCha8Rng,
}

/// HMPPO training: centralised critic on `{s1; s2}`.
pub fn train(config: &SystemConfig, hyper: &HyperParams, seed: u64) -> Result<TrainOutput> {
    train_with(config, hyper, seed, CriticLayout::Centralized)
}

/// Collect / GAE / update loop shared by the centralised and independent
/// learners, evaluating on the fixed episodes every `eval_interval` steps.
pub fn train_with(config: &SystemConfig, hyper: &HyperParams, seed: u64, layout: CriticLayout) -> Result<TrainOutput> {
    config.validate()?;
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents = Agents::for_config(config, hyper, layout, &mut rng)?;
    let mut last_good = agents.clone();
    let mut stats = UpdateStats::default();
    let mut log = Vec::with_capacity(hyper.total_steps / hyper.eval_interval);
    let mut final_eval = EvalSummary::default();
    let mut env_steps = 0usize;
    let mut next_eval = hyper.eval_interval;
    let mut status = TrainStatus::Completed;

    'outer: while env_steps < hyper.total_steps {
        let seeds: Vec<u64> = (0..hyper.workers).map(|_| rng.next_u64()).collect();
        let mut rollout = collect_rollout(config, &agents, hyper, &seeds, ActMode::Sample)?;
        env_steps += rollout.buffer.len();
        rollout.buffer.compute_gae(hyper.gamma, hyper.gae_lambda, hyper.normalize_advantages)?;

        if hyper.anneal_lr {
            let done = (env_steps - rollout.buffer.len()) as f64 / hyper.total_steps as f64;
            agents.set_lr_fraction(hyper, 1.0 - done);
        }
        match agents.update(&rollout.buffer, hyper, &mut rng) {
            Ok(s) if agents.all_params_finite() => stats = s,
            Ok(_) => {
                status = TrainStatus::Aborted("non-finite parameters after update".into());
            }
            Err(Error::NonFinite(msg)) => status = TrainStatus::Aborted(msg),
            Err(e) => return Err(e),
        }
        if status != TrainStatus::Completed {
            log::warn!("training aborted at {env_steps} env steps: {status:?}");
            agents = last_good;
            break 'outer;
        }
        last_good = agents.clone();

        while env_steps >= next_eval && next_eval <= hyper.total_steps {
            let eval =
                evaluate(config, EvalPolicy::Deterministic(&agents), hyper.eval_seed, hyper.eval_episodes, true)?;
            let row = LogRow::new(env_steps, &eval, &stats);
            if !row.is_finite() {
                status = TrainStatus::Aborted(format!("non-finite metrics at {env_steps} env steps"));
                break 'outer;
            }
            log::info!(
                "steps {:>7} reward {:>9.3} delay {:>8.2} min perplexity {:>6.2} switches {:>6.1}",
                env_steps,
                row.eval_reward_mean,
                row.total_delay_min,
                row.mean_perplexity,
                row.emulator_switches
            );
            log.push(row);
            final_eval = eval;
            next_eval += hyper.eval_interval;
        }
    }

    Ok(TrainOutput { log, agents: Some(agents), final_eval, env_steps, status, rng })
}
