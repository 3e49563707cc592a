use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::agents::Agents;
use super::buffer::RolloutBuffer;
use super::HyperParams;
use crate::env::{EpisodeMetrics, EpisodeState, StateScales, TraceRow};
use crate::error::Result;
use crate::sysmodel::{JointDecision, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    /// Sample from both heads.
    Sample,
    /// Uniform random actions; stored log-probabilities are still the heads'.
    Random,
}

#[derive(Debug, Clone)]
pub struct RolloutOutput {
    pub buffer: RolloutBuffer,
    pub episodes: Vec<EpisodeMetrics>,
}

fn run_worker(
    config: &SystemConfig,
    agents: &Agents,
    hyper: &HyperParams,
    seed: u64,
    mode: ActMode,
) -> Result<(RolloutBuffer, EpisodeMetrics)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales = StateScales::new(config);
    let (mut env, mut s1_raw) = EpisodeState::reset(config, rng.next_u64())?;
    let mut buf = RolloutBuffer::with_critics(agents.critics.len());
    let (lo, hi) = (config.retention_min, config.retention_max);

    loop {
        // decentralised execution: actor 1 sees s1 only, actor 2 sees s2 only
        let s1 = s1_raw.normalized(&scales);
        let (bits, logp1) = match mode {
            ActMode::Sample => {
                let a = agents.actor1.sample(&s1, &mut rng)?;
                (a.bits, a.logprob)
            }
            ActMode::Random => {
                let bits: Vec<u8> = (0..config.num_ues).map(|_| u8::from(rng.random::<bool>())).collect();
                let lp = agents.actor1.log_prob(&s1, &bits)?.0;
                (bits, lp)
            }
        };
        let s2 = env.observe_agent2(&bits)?.normalized(&scales);
        let (retentions, raw, logp2) = match mode {
            ActMode::Sample => {
                let a = agents.actor2.sample(&s2, &mut rng)?;
                (a.retentions, a.raw, a.logprob)
            }
            ActMode::Random => {
                let ret: Vec<f64> = (0..config.num_ues).map(|_| rng.random_range(lo..hi)).collect();
                let raw: Vec<f64> = ret.iter().map(|&a| agents.actor2.unsquash(a)).collect();
                let lp = agents.actor2.log_prob_raw(&s2, &raw)?.0;
                (ret, raw, lp)
            }
        };
        let values = agents.values(&s1, &s2)?;
        let step = env.step(&JointDecision::new(bits.clone(), retentions.clone()))?;

        buf.s1.push(s1);
        buf.s2.push(s2);
        buf.a1.push(bits);
        buf.a2.push(retentions);
        buf.a2_raw.push(raw);
        buf.logp1.push(logp1);
        buf.logp2.push(logp2);
        buf.rewards.push(step.reward * hyper.reward_scale);
        buf.dones.push(step.done);
        for (k, v) in values.into_iter().enumerate() {
            buf.values[k].push(v);
        }
        let tail = if step.done && hyper.bootstrap_time_limit {
            // the horizon is a cut-off the agents cannot observe: value the
            // state it lands in, with agent 1 acting there as usual
            let s1_next = step.next_state.normalized(&scales);
            let bits = agents.actor1.sample(&s1_next, &mut rng)?.bits;
            let s2_next = env.observe_agent2(&bits)?.normalized(&scales);
            agents.values(&s1_next, &s2_next)?
        } else {
            vec![0.0; agents.critics.len()]
        };
        for (k, v) in tail.into_iter().enumerate() {
            buf.tail_values[k].push(v);
        }
        if step.done {
            break;
        }
        s1_raw = step.next_state;
    }
    Ok((buf, env.metrics()?))
}

/// One complete episode per worker seed, concatenated in seed order. Workers
/// run in parallel against the same immutable parameter snapshot.
pub fn collect_rollout(
    config: &SystemConfig,
    agents: &Agents,
    hyper: &HyperParams,
    worker_seeds: &[u64],
    mode: ActMode,
) -> Result<RolloutOutput> {
    let parts: Vec<Result<(RolloutBuffer, EpisodeMetrics)>> =
        worker_seeds.par_iter().map(|&seed| run_worker(config, agents, hyper, seed, mode)).collect();
    let mut buffer = RolloutBuffer::with_critics(agents.critics.len());
    let mut episodes = Vec::with_capacity(parts.len());
    for part in parts {
        let (b, m) = part?;
        buffer.extend(b);
        episodes.push(m);
    }
    Ok(RolloutOutput { buffer, episodes })
}

#[derive(Debug, Clone, Default)]
pub struct EvalSummary {
    pub reward_mean: f64,
    /// Sample standard deviation over episodes (0 for a single episode).
    pub reward_std: f64,
    pub total_delay_min: f64,
    pub mean_perplexity: f64,
    pub switches: f64,
    pub episodes: Vec<EpisodeMetrics>,
    pub trace: Vec<TraceRow>,
}

impl EvalSummary {
    pub fn from_episodes(episodes: Vec<EpisodeMetrics>, trace: Vec<TraceRow>) -> Self {
        let n = episodes.len() as f64;
        let mean = |f: &dyn Fn(&EpisodeMetrics) -> f64| episodes.iter().map(f).sum::<f64>() / n;
        let reward_mean = mean(&|m| m.episodic_reward);
        let reward_std = if episodes.len() > 1 {
            (episodes.iter().map(|m| (m.episodic_reward - reward_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            reward_mean,
            reward_std,
            total_delay_min: mean(&|m| m.total_delay_min),
            mean_perplexity: mean(&|m| m.mean_perplexity),
            switches: mean(&|m| m.switch_count as f64),
            episodes,
            trace,
        }
    }
}

/// Policy used on the fixed evaluation episodes.
#[derive(Debug, Clone, Copy)]
pub enum EvalPolicy<'a> {
    /// Bernoulli bits by threshold 0.5, retentions by squashed mean.
    Deterministic(&'a Agents),
    /// Bernoulli(0.5) bits and uniform retentions from a seeded stream.
    Random { seed: u64 },
}

fn eval_episode(
    config: &SystemConfig,
    policy: EvalPolicy<'_>,
    env_seed: u64,
    episode: usize,
    with_trace: bool,
) -> Result<(EpisodeMetrics, Vec<TraceRow>)> {
    let scales = StateScales::new(config);
    let (mut env, mut s1_raw) = EpisodeState::reset(config, env_seed)?;
    let mut action_rng = match policy {
        EvalPolicy::Random { seed } => {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(episode as u64);
            Some(r)
        }
        EvalPolicy::Deterministic(_) => None,
    };
    let mut trace = Vec::new();
    let (lo, hi) = (config.retention_min, config.retention_max);
    loop {
        let decision = match (policy, action_rng.as_mut()) {
            (EvalPolicy::Deterministic(agents), _) => {
                let bits = agents.actor1.mode(&s1_raw.normalized(&scales))?;
                let s2 = env.observe_agent2(&bits)?.normalized(&scales);
                JointDecision::new(bits, agents.actor2.mode(&s2)?)
            }
            (EvalPolicy::Random { .. }, Some(rng)) => random_decision(config.num_ues, (lo, hi), rng),
            (EvalPolicy::Random { .. }, None) => unreachable!("random policy always owns a stream"),
        };
        let t = env.task_index();
        let caches_before = env.caches().to_vec();
        let step = env.step(&decision)?;
        if with_trace {
            trace.extend(TraceRow::from_step(episode, t, &caches_before, &decision, &step.outcome));
        }
        if step.done {
            break;
        }
        s1_raw = step.next_state;
    }
    Ok((env.metrics()?, trace))
}

pub(crate) fn random_decision<R: Rng + ?Sized>(n: usize, (lo, hi): (f64, f64), rng: &mut R) -> JointDecision {
    let placement = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    let retention = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    JointDecision::new(placement, retention)
}

/// Runs `episodes` evaluation episodes with env seeds `base_seed + i`.
pub fn evaluate(
    config: &SystemConfig,
    policy: EvalPolicy<'_>,
    base_seed: u64,
    episodes: usize,
    with_trace: bool,
) -> Result<EvalSummary> {
    let results: Vec<Result<(EpisodeMetrics, Vec<TraceRow>)>> = (0..episodes)
        .into_par_iter()
        .map(|i| eval_episode(config, policy, base_seed.wrapping_add(i as u64), i, with_trace))
        .collect();
    let mut metrics = Vec::with_capacity(episodes);
    let mut trace = Vec::new();
    for r in results {
        let (m, t) = r?;
        metrics.push(m);
        trace.extend(t);
    }
    Ok(EvalSummary::from_episodes(metrics, trace))
}
