//! Comparison policies: independent PPO learners and the uniform random policy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hmppo::{
    evaluate, train_with, CriticLayout, EvalPolicy, HyperParams, LogRow, TrainOutput, TrainStatus, UpdateStats,
};
use crate::sysmodel::SystemConfig;

/// Two self-contained PPO agents sharing only the global reward: the
/// placement agent's critic reads `s1`, the retention agent's critic reads
/// `s2`. Hyperparameters and log schema are those of HMPPO.
pub fn ippo_train(config: &SystemConfig, hyper: &HyperParams, seed: u64) -> Result<TrainOutput> {
    train_with(config, hyper, seed, CriticLayout::Independent)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
}

impl MetricStats {
    /// Mean and sample standard deviation.
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Self {
        let xs: Vec<f64> = xs.into_iter().collect();
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n;
        let std =
            if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PolicySummary {
    pub episodes: usize,
    pub reward: MetricStats,
    pub total_delay_min: MetricStats,
    pub mean_perplexity: MetricStats,
    pub switches: MetricStats,
}

/// Uniform random placements and retentions over `episodes` episodes with
/// env seeds `seed, seed + 1, ...`.
pub fn random_policy_rollout(config: &SystemConfig, episodes: usize, seed: u64) -> Result<PolicySummary> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("need at least one episode".into()));
    }
    config.validate()?;
    let eval = evaluate(config, EvalPolicy::Random { seed }, seed, episodes, false)?;
    let e = &eval.episodes;
    Ok(PolicySummary {
        episodes,
        reward: MetricStats::of(e.iter().map(|m| m.episodic_reward)),
        total_delay_min: MetricStats::of(e.iter().map(|m| m.total_delay_min)),
        mean_perplexity: MetricStats::of(e.iter().map(|m| m.mean_perplexity)),
        switches: MetricStats::of(e.iter().map(|m| m.switch_count as f64)),
    })
}

/// Random policy packaged like a training run: one log row per evaluation
/// interval, each evaluating the random policy on the fixed evaluation
/// episodes with a fresh action stream. Loss columns are zero; entropy
/// columns hold the random policy's own entropies.
pub fn random_train(config: &SystemConfig, hyper: &HyperParams, seed: u64) -> Result<TrainOutput> {
    config.validate()?;
    hyper.validate()?;
    let n = config.num_ues as f64;
    let stats = UpdateStats {
        entropy1: n * std::f64::consts::LN_2,
        entropy2: n * (config.retention_max - config.retention_min).ln(),
        ..UpdateStats::default()
    };
    let rows = hyper.total_steps / hyper.eval_interval;
    let mut log = Vec::with_capacity(rows);
    let mut final_eval = Default::default();
    for k in 1..=rows {
        let action_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64);
        let eval = evaluate(
            config,
            EvalPolicy::Random { seed: action_seed },
            hyper.eval_seed,
            hyper.eval_episodes,
            k == rows,
        )?;
        log.push(LogRow::new(k * hyper.eval_interval, &eval, &stats));
        final_eval = eval;
    }
    Ok(TrainOutput {
        log,
        agents: None,
        final_eval,
        env_steps: rows * hyper.eval_interval,
        status: TrainStatus::Completed,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmppo::{collect_rollout, ActMode, Agents};

    #[test]
    fn random_policy_is_deterministic() {
        let cfg = SystemConfig::with_ues(4);
        let a = random_policy_rollout(&cfg, 5, 17).unwrap();
        let b = random_policy_rollout(&cfg, 5, 17).unwrap();
        assert_eq!(a, b);
        assert!(random_policy_rollout(&cfg, 0, 17).is_err());
    }

    #[test]
    fn random_retention_mean_is_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut sum = 0.0;
        let draws = 100_000;
        for _ in 0..draws / 10 {
            let d = crate::hmppo::random_decision(10, (0.2, 0.8), &mut rng);
            assert!(d.retention.iter().all(|&e| (0.2..=0.8).contains(&e)));
            sum += d.retention.iter().sum::<f64>();
        }
        assert!((sum / draws as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn random_switch_rate_matches_estimate() {
        // per local step, reuse happens with probability ~ 2*tol/(hi-lo)
        let cfg = SystemConfig::with_ues(8);
        let eval = evaluate(&cfg, EvalPolicy::Random { seed: 3 }, 100, 1000, true).unwrap();
        let local_steps = eval.trace.iter().filter(|r| r.z == 0).count() as f64;
        let first_local = {
            let mut seen = std::collections::HashSet::new();
            eval.trace.iter().filter(|r| r.z == 0 && seen.insert((r.episode, r.n))).count() as f64
        };
        let switches = eval.trace.iter().filter(|r| r.indicator == 1).count() as f64;
        // cold starts always switch; later local steps reuse with p ~ 2*0.01/0.6
        let p_reuse = 2.0 * 0.01 / 0.6;
        let expected = first_local + (local_steps - first_local) * (1.0 - p_reuse);
        assert!((switches - expected).abs() / expected < 0.01, "{switches} vs {expected}");
    }

    #[test]
    fn random_override_rollout_matches_random_policy() {
        let cfg = SystemConfig::with_ues(6);
        let hyper = HyperParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let agents = Agents::for_config(&cfg, &hyper, CriticLayout::Centralized, &mut rng).unwrap();
        let seeds: Vec<u64> = (0..100).map(|i| 500 + i).collect();
        let out = collect_rollout(&cfg, &agents, &hyper, &seeds, ActMode::Random).unwrap();
        let a = MetricStats::of(out.episodes.iter().map(|m| m.episodic_reward));
        let b = random_policy_rollout(&cfg, 100, 77).unwrap().reward;
        let se = (a.std.powi(2) / 100.0 + b.std.powi(2) / 100.0).sqrt();
        assert!((a.mean - b.mean).abs() < 4.0 * se, "{a:?} vs {b:?}");
    }

    #[test]
    fn random_train_log_shape() {
        let cfg = SystemConfig::with_ues(3);
        let hyper = HyperParams { total_steps: 2000, eval_interval: 500, eval_episodes: 2, ..HyperParams::default() };
        let out = random_train(&cfg, &hyper, 1).unwrap();
        assert_eq!(out.log.len(), 4);
        assert_eq!(out.log[3].env_steps, 2000);
        assert!(!out.final_eval.trace.is_empty());
    }
}
