//! Episodic two-agent environment around [`crate::sysmodel::step_system`].
//!
//! Every UE owns its own ChaCha stream (same seed, stream index = UE index),
//! so the draws of UE `n` do not depend on how many other UEs exist.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::sysmodel::{self, JointDecision, StepOutcome, SystemConfig, TaskDraw};

/// Raw Agent-1 observation: previous gains, complexities, data sizes (bits)
/// and cached retentions (0 = empty), each block of length N.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentOneState(pub Vec<f64>);

/// Raw Agent-2 observation: cached retentions, Agent-1 bits, complexities.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTwoState(pub Vec<f64>);

/// Fixed per-slot scales applied before states reach a network.
#[derive(Debug, Clone, Copy)]
pub struct StateScales {
    gain: f64,
    data_bits: f64,
    complexity: f64,
}

impl StateScales {
    pub fn new(config: &SystemConfig) -> Self {
        Self {
            gain: config.ue_distance_range.0.powf(config.path_loss_exponent),
            data_bits: 1.0 / config.data_size_range_bits.1,
            complexity: 1.0 / config.complexity_range.1,
        }
    }
}

impl AgentOneState {
    pub fn num_ues(&self) -> usize {
        self.0.len() / 4
    }

    pub fn normalized(&self, scales: &StateScales) -> Vec<f64> {
        let n = self.num_ues();
        self.0
            .iter()
            .enumerate()
            .map(|(i, &v)| match i / n {
                0 => v * scales.gain,
                1 => v * scales.complexity,
                2 => v * scales.data_bits,
                _ => v,
            })
            .collect()
    }
}

impl AgentTwoState {
    pub fn num_ues(&self) -> usize {
        self.0.len() / 3
    }

    pub fn normalized(&self, scales: &StateScales) -> Vec<f64> {
        let n = self.num_ues();
        self.0.iter().enumerate().map(|(i, &v)| if i / n == 2 { v * scales.complexity } else { v }).collect()
    }
}

/// Running totals over one episode.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulators {
    pub total_delay_s: f64,
    pub perplexity_sum: f64,
    pub switch_count: usize,
    pub reward_sum: f64,
    /// Sum over steps of the per-step mean perplexity.
    pub mean_perplexity_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    pub total_delay_min: f64,
    pub mean_perplexity: f64,
    pub switch_count: usize,
    pub episodic_reward: f64,
}

#[derive(Debug, Clone)]
pub struct EpisodeState {
    config: SystemConfig,
    /// 1-based index of the task about to be decided.
    t: usize,
    caches: Vec<Option<f64>>,
    distances: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
    tasks: Vec<TaskDraw>,
    prev_gains: Vec<f64>,
    acc: Accumulators,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub next_state: AgentOneState,
    pub reward: f64,
    pub done: bool,
    pub outcome: StepOutcome,
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn draw_task(config: &SystemConfig, distance: f64, rng: &mut ChaCha8Rng) -> Result<TaskDraw> {
    let complexity = uniform(rng, config.complexity_range);
    let data_size_bits = uniform(rng, config.data_size_range_bits);
    let uplink_power = uniform(rng, config.uplink_power_range);
    let avg_channel_gain =
        sysmodel::draw_channel_gain(distance, config.path_loss_exponent, config.fading_samples_per_task, rng)?;
    Ok(TaskDraw { complexity, data_size_bits, avg_channel_gain, uplink_power })
}

impl EpisodeState {
    pub fn reset(config: &SystemConfig, seed: u64) -> Result<(Self, AgentOneState)> {
        config.validate()?;
        let n = config.num_ues;
        let mut rngs = Vec::with_capacity(n);
        let mut distances = Vec::with_capacity(n);
        let mut prev_gains = Vec::with_capacity(n);
        let mut tasks = Vec::with_capacity(n);
        for ue in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ue as u64);
            let d = uniform(&mut rng, config.ue_distance_range);
            // stand-in for the gain of the (nonexistent) previous task
            let g0 =
                sysmodel::draw_channel_gain(d, config.path_loss_exponent, config.fading_samples_per_task, &mut rng)?;
            tasks.push(draw_task(config, d, &mut rng)?);
            distances.push(d);
            prev_gains.push(g0);
            rngs.push(rng);
        }
        let ep = Self {
            config: config.clone(),
            t: 1,
            caches: vec![None; n],
            distances,
            rngs,
            tasks,
            prev_gains,
            acc: Accumulators::default(),
        };
        let s1 = ep.observe_agent1();
        Ok((ep, s1))
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn task_index(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.t > self.config.tasks_per_ue
    }

    pub fn caches(&self) -> &[Option<f64>] {
        &self.caches
    }

    pub fn tasks(&self) -> &[TaskDraw] {
        &self.tasks
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn accumulators(&self) -> &Accumulators {
        &self.acc
    }

    fn cache_slots(&self) -> impl Iterator<Item = f64> + '_ {
        self.caches.iter().map(|c| c.unwrap_or(0.0))
    }

    pub fn observe_agent1(&self) -> AgentOneState {
        let mut v = Vec::with_capacity(4 * self.config.num_ues);
        v.extend_from_slice(&self.prev_gains);
        v.extend(self.tasks.iter().map(|t| t.complexity));
        v.extend(self.tasks.iter().map(|t| t.data_size_bits));
        v.extend(self.cache_slots());
        AgentOneState(v)
    }

    pub fn observe_agent2(&self, a1: &[u8]) -> Result<AgentTwoState> {
        check_len("agent-1 action", self.config.num_ues, a1.len())?;
        if let Some(bad) = a1.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidArgument(format!("agent-1 action bit {bad} not in {{0,1}}")));
        }
        let mut v = Vec::with_capacity(3 * self.config.num_ues);
        v.extend(self.cache_slots());
        v.extend(a1.iter().map(|&b| f64::from(b)));
        v.extend(self.tasks.iter().map(|t| t.complexity));
        Ok(AgentTwoState(v))
    }

    pub fn step(&mut self, decision: &JointDecision) -> Result<StepResult> {
        if self.is_done() {
            return Err(Error::Lifecycle(format!("episode finished after {} tasks", self.config.tasks_per_ue)));
        }
        let (outcome, next_caches) = sysmodel::step_system(&self.config, &self.caches, &self.tasks, decision)?;
        self.caches = next_caches;

        self.acc.total_delay_s += outcome.system_delay_s;
        self.acc.perplexity_sum += outcome.per_ue_perplexity.iter().sum::<f64>();
        self.acc.mean_perplexity_sum += outcome.mean_perplexity();
        self.acc.switch_count += outcome.switch_count();
        self.acc.reward_sum += outcome.reward;

        for ue in 0..self.config.num_ues {
            self.prev_gains[ue] = self.tasks[ue].avg_channel_gain;
            self.tasks[ue] = draw_task(&self.config, self.distances[ue], &mut self.rngs[ue])?;
        }
        self.t += 1;

        Ok(StepResult { next_state: self.observe_agent1(), reward: outcome.reward, done: self.is_done(), outcome })
    }

    pub fn metrics(&self) -> Result<EpisodeMetrics> {
        if !self.is_done() {
            return Err(Error::Lifecycle(format!(
                "metrics requested at task {} of {}",
                self.t, self.config.tasks_per_ue
            )));
        }
        let tasks = (self.config.num_ues * self.config.tasks_per_ue) as f64;
        Ok(EpisodeMetrics {
            total_delay_min: self.acc.total_delay_s / 60.0,
            mean_perplexity: self.acc.perplexity_sum / tasks,
            switch_count: self.acc.switch_count,
            episodic_reward: self.acc.reward_sum,
        })
    }
}

/// One CSV row of the per-step trace: `(episode, t, n)` granularity.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub episode: usize,
    pub t: usize,
    pub n: usize,
    pub z: u8,
    pub e_proposed: f64,
    pub e_cached: f64,
    pub indicator: u8,
    pub d_up_s: f64,
    pub d_down_s: f64,
    pub kappa: f64,
    pub reward_step: f64,
}

pub const TRACE_HEADER: &str = "episode,t,n,z,E_proposed,E_cached,I,d_up_s,d_down_s,kappa,reward_step";

/// Nine significant digits, exponent form.
pub fn fmt_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

impl TraceRow {
    pub fn from_step(
        episode: usize,
        t: usize,
        caches_before: &[Option<f64>],
        decision: &JointDecision,
        outcome: &StepOutcome,
    ) -> Vec<TraceRow> {
        (0..decision.placement.len())
            .map(|n| TraceRow {
                episode,
                t,
                n,
                z: decision.placement[n],
                e_proposed: decision.retention[n],
                e_cached: caches_before[n].unwrap_or(0.0),
                indicator: outcome.switch_indicators[n],
                d_up_s: outcome.upload_delay_s[n],
                d_down_s: outcome.download_delay_s[n],
                kappa: outcome.per_ue_perplexity[n],
                reward_step: outcome.reward,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.episode,
            self.t,
            self.n,
            self.z,
            fmt_sig9(self.e_proposed),
            fmt_sig9(self.e_cached),
            self.indicator,
            fmt_sig9(self.d_up_s),
            fmt_sig9(self.d_down_s),
            fmt_sig9(self.kappa),
            fmt_sig9(self.reward_step),
        )
    }

    pub fn parse(line: &str) -> Option<TraceRow> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 11 {
            return None;
        }
        Some(TraceRow {
            episode: f[0].parse().ok()?,
            t: f[1].parse().ok()?,
            n: f[2].parse().ok()?,
            z: f[3].parse().ok()?,
            e_proposed: f[4].parse().ok()?,
            e_cached: f[5].parse().ok()?,
            indicator: f[6].parse().ok()?,
            d_up_s: f[7].parse().ok()?,
            d_down_s: f[8].parse().ok()?,
            kappa: f[9].parse().ok()?,
            reward_step: f[10].parse().ok()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_local(n: usize, e: f64) -> JointDecision {
        JointDecision::new(vec![0; n], vec![e; n])
    }

    #[test]
    fn reset_is_deterministic() {
        let cfg = SystemConfig::default();
        let (a, sa) = EpisodeState::reset(&cfg, 9).unwrap();
        let (b, sb) = EpisodeState::reset(&cfg, 9).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(a.tasks(), b.tasks());
        assert_eq!(sa.0.len(), 32);
        assert!(sa.0[24..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn ue_streams_are_independent_of_fleet_size() {
        let (small, _) = EpisodeState::reset(&SystemConfig::with_ues(3), 4).unwrap();
        let (big, _) = EpisodeState::reset(&SystemConfig::with_ues(7), 4).unwrap();
        assert_eq!(small.tasks(), &big.tasks()[..3]);
        assert_eq!(small.distances(), &big.distances()[..3]);
    }

    #[test]
    fn observe_agent2_layout() {
        let cfg = SystemConfig::with_ues(2);
        let (mut ep, _) = EpisodeState::reset(&cfg, 1).unwrap();
        ep.caches = vec![Some(0.5), None];
        ep.tasks[0].complexity = 3.0;
        ep.tasks[1].complexity = 7.0;
        let s2 = ep.observe_agent2(&[1, 0]).unwrap();
        assert_eq!(s2.0, vec![0.5, 0.0, 1.0, 0.0, 3.0, 7.0]);
        assert!(ep.observe_agent2(&[1, 2]).is_err());
        assert!(ep.observe_agent2(&[1]).is_err());
    }

    #[test]
    fn lifecycle_and_metrics() {
        let cfg = SystemConfig::default();
        let (mut ep, _) = EpisodeState::reset(&cfg, 2).unwrap();
        assert!(ep.metrics().is_err());
        let mut first_delay = None;
        for k in 1..=50 {
            let r = ep.step(&all_local(8, 0.8)).unwrap();
            if k == 1 {
                first_delay = Some(r.outcome.system_delay_s);
                assert_eq!(ep.accumulators().total_delay_s, r.outcome.system_delay_s);
            }
            assert_eq!(r.done, k == 50);
        }
        assert!(ep.step(&all_local(8, 0.8)).is_err());
        let m = ep.metrics().unwrap();
        assert_eq!(m.switch_count, 8);
        assert!((m.total_delay_min - first_delay.unwrap() / 60.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_scales() {
        let cfg = SystemConfig::with_ues(1);
        let scales = StateScales::new(&cfg);
        let s1 = AgentOneState(vec![1e-4, 10.0, 4e9, 0.5]);
        let v = s1.normalized(&scales);
        assert!((v[0] - 1.0).abs() < 1e-12);
        assert_eq!(&v[1..], &[1.0, 1.0, 0.5]);
    }

    #[test]
    fn trace_row_roundtrip() {
        let row = TraceRow {
            episode: 3,
            t: 7,
            n: 1,
            z: 0,
            e_proposed: 0.712345678912,
            e_cached: 0.0,
            indicator: 1,
            d_up_s: 0.0,
            d_down_s: 1234.56789,
            kappa: 27.096,
            reward_step: -2.8548,
        };
        let back = TraceRow::parse(&row.to_csv()).unwrap();
        assert_eq!(back.d_down_s, 1234.56789);
        assert!((back.e_proposed - row.e_proposed).abs() < 1e-8);
    }
}
