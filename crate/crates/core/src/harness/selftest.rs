//! Oracle, gradient and invariant checks shared by the `selftest` command and
//! the acceptance run.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Algorithm, ExperimentConfig};
use super::run::{execute_run, LOG_FILE};
use crate::env::EpisodeState;
use crate::error::Result;
use crate::hmppo::{bandit_sanity, clipped_surrogate, critic_grad, gae};
use crate::nn::gradcheck::{central_difference, max_relative_error, write_slices, FD_STEP};
use crate::nn::{Activation, BernoulliHead, GaussianHead, Mlp};
use crate::sysmodel::{
    download_delay, emulator_accuracy, global_reward, step_system, task_perplexity, uplink_rate, upload_delay,
    JointDecision, SystemConfig, TaskDraw,
};

/// Independently computed (40-digit) reference values.
#[allow(clippy::excessive_precision)]
pub mod oracle {
    /// Rate at 2.5e4 Hz, 0.5 W, gain 1e-5, noise 4e-21 W/Hz.
    pub const UPLINK_RATE: f64 = 888_530.226_094_745_993;
    /// 3.2e9 bits over [`UPLINK_RATE`].
    pub const UPLOAD_DELAY: f64 = 3_601.453_170_664_310_909;
    /// Rate at 1e6 Hz, 60 W, gain 1e-5, noise 4e-21 W/Hz.
    pub const DOWNLINK_RATE: f64 = 37_126_171.544_491_759_97;
    /// Half of an 8.64e10-bit model over [`DOWNLINK_RATE`].
    pub const DOWNLOAD_DELAY: f64 = 1_163.599_644_208_652_215;
    /// Centre log-density of a standard normal squashed onto (0.2, 0.8).
    pub const SQUASHED_CENTRE_LOGPROB: f64 = 0.285_034_271_121_263_45;
}

/// Acceptance tolerance of the formula oracles.
pub const FORMULA_RTOL: f64 = 1e-9;
pub const POLY_TOL: f64 = 1e-12;
pub const GRAD_RTOL: f64 = 1e-4;
pub const GAE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] {:>2}. {}: {}", self.id, self.name, self.detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn check(id: u8, name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { id, name, passed, detail },
        Err(e) => Check { id, name, passed: false, detail: format!("error: {e}") },
    }
}

fn formula_cases() -> Result<Vec<(&'static str, f64, f64)>> {
    let poly = (25.2, -43.1, 31.9);
    let rate_up = uplink_rate(2.5e4, 0.5, 1e-5, 4e-21)?;
    let rate_down = uplink_rate(1e6, 60.0, 1e-5, 4e-21)?;
    let task = TaskDraw { complexity: 10.0, data_size_bits: 3.2e9, avg_channel_gain: 1e-5, uplink_power: 0.5 };

    let up_cfg = SystemConfig { num_ues: 1, uplink_bandwidth_total: 2.5e4, ..SystemConfig::default() };
    let (up, up_caches) = step_system(&up_cfg, &[Some(0.4)], &[task], &JointDecision::new(vec![1], vec![0.7]))?;
    let down_cfg = SystemConfig { num_ues: 1, ..SystemConfig::default() };
    let (down, _) = step_system(&down_cfg, &[None], &[task], &JointDecision::new(vec![0], vec![0.5]))?;
    let two_cfg = SystemConfig::with_ues(2);
    let (two, _) =
        step_system(&two_cfg, &[Some(0.8), None], &[task, task], &JointDecision::new(vec![0, 1], vec![0.8, 0.3]))?;

    Ok(vec![
        ("uplink_rate", rate_up, oracle::UPLINK_RATE),
        ("upload_delay", upload_delay(3.2e9, rate_up, 1)?, oracle::UPLOAD_DELAY),
        ("downlink rate", rate_down, oracle::DOWNLINK_RATE),
        ("download_delay", download_delay(0.5, 8.64e10, rate_down, 1, 0)?, oracle::DOWNLOAD_DELAY),
        ("task_perplexity local", task_perplexity(0.8, 0, 10.0, 10.0, poly)?, 27.096),
        ("task_perplexity server", task_perplexity(0.3, 1, 10.0, 10.0, poly)?, 28.0),
        ("global_reward", global_reward(&two_cfg, (27.096 + 28.0) / 2.0, 100.0), -2.8548),
        ("step_system upload", up.system_delay_s, oracle::UPLOAD_DELAY),
        ("step_system cache kept", up_caches[0].unwrap_or(f64::NAN), 0.4),
        ("step_system cold download", down.system_delay_s, oracle::DOWNLOAD_DELAY),
        ("step_system two-UE perplexity", two.mean_perplexity(), (27.096 + 28.0) / 2.0),
    ])
}

/// Criterion 1: closed-form models against frozen oracle values.
pub fn formula_oracles() -> Check {
    check(
        1,
        "formula oracles",
        (|| {
            let cases = formula_cases()?;
            let worst =
                cases.iter().map(|(name, got, want)| (name, rel(*got, *want))).fold(("", 0.0), |acc, (n, r)| {
                    if r > acc.1 {
                        (n, r)
                    } else {
                        acc
                    }
                });
            Ok((
                cases.iter().all(|(_, got, want)| rel(*got, *want) <= FORMULA_RTOL),
                format!("{} cases, worst relative error {:.2e} ({})", cases.len(), worst.1, worst.0),
            ))
        })(),
    )
}

/// Criterion 2: the perplexity polynomial at its anchor points.
pub fn polynomial_anchor() -> Check {
    check(
        2,
        "polynomial anchor",
        (|| {
            let poly = (25.2, -43.1, 31.9);
            let pts = [(0.2, 24.288), (0.8, 13.548), (1.0, 14.0)];
            let mut worst: f64 = 0.0;
            for (e, want) in pts {
                worst = worst.max((emulator_accuracy(e, poly)? - want).abs());
            }
            Ok((worst <= POLY_TOL, format!("f(0.2), f(0.8), f(1.0) within {worst:.1e}")))
        })(),
    )
}

fn random_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn mlp_instance(rng: &mut ChaCha8Rng, activation: Activation) -> Result<f64> {
    let sizes = [rng.random_range(2..6), rng.random_range(3..8), rng.random_range(3..8), rng.random_range(1..4)];
    let mut net = Mlp::new(&sizes, activation, 1.0, rng)?;
    let x = random_vec(rng, sizes[0], 1.5);
    let w = random_vec(rng, sizes[3], 1.0);
    let (out, cache) = net.forward(&x)?;
    let _ = out;
    let analytic = net.backward(&cache, &w)?;
    let p0 = net.params().to_vec();
    let numeric = central_difference(&p0, FD_STEP, |p| {
        net.params_mut().copy_from_slice(p);
        Ok(net.predict(&x)?.iter().zip(&w).map(|(o, w)| o * w).sum())
    })?;
    Ok(max_relative_error(&analytic, &numeric))
}

fn critic_instance(rng: &mut ChaCha8Rng) -> Result<f64> {
    let sizes = [rng.random_range(3..10), 8, 8, 1];
    let mut critic = Mlp::new(&sizes, Activation::Tanh, 1.0, rng)?;
    let x = random_vec(rng, sizes[0], 1.0);
    let target = rng.random_range(-3.0..3.0);
    let coef = 0.5;
    let (v, cache) = critic.forward(&x)?;
    let analytic = critic.backward(&cache, &[coef * critic_grad(v[0], target)])?;
    let p0 = critic.params().to_vec();
    let numeric = central_difference(&p0, FD_STEP, |p| {
        critic.params_mut().copy_from_slice(p);
        Ok(coef * (critic.predict(&x)?[0] - target).powi(2))
    })?;
    Ok(max_relative_error(&analytic, &numeric))
}

fn bernoulli_instance(rng: &mut ChaCha8Rng, ppo: bool) -> Result<f64> {
    let (input, outputs) = (rng.random_range(2..8), rng.random_range(1..6));
    let net = Mlp::new(&[input, 6, outputs], Activation::Tanh, 1.0, rng)?;
    let mut head = BernoulliHead::from_net(net);
    let s = random_vec(rng, input, 1.0);
    let bits: Vec<u8> = (0..outputs).map(|_| u8::from(rng.random::<bool>())).collect();
    let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-0.1..0.1));
    let (lp0, _) = head.log_prob(&s, &bits)?;
    // an old log-probability that keeps the ratio inside the clip range
    let old = lp0 + 0.05;
    let loss = |lp: f64, ent: f64| {
        if ppo {
            clipped_surrogate(lp, old, a, 0.2).0 + b * ent
        } else {
            a * lp + b * ent
        }
    };
    let mut analytic = vec![0.0; head.num_params()];
    head.accumulate_grad(
        &s,
        &bits,
        |lp, _| if ppo { (clipped_surrogate(lp, old, a, 0.2).1, b) } else { (a, b) },
        &mut analytic,
    )?;
    let p0 = head.params_flat();
    let numeric = central_difference(&p0, FD_STEP, |p| {
        write_slices(head.param_slices_mut(), p)?;
        let (lp, ent) = head.log_prob(&s, &bits)?;
        Ok(loss(lp, ent))
    })?;
    Ok(max_relative_error(&analytic, &numeric))
}

fn gaussian_instance(rng: &mut ChaCha8Rng, ppo: bool) -> Result<f64> {
    let (input, outputs) = (rng.random_range(2..8), rng.random_range(1..6));
    let net = Mlp::new(&[input, 6, outputs], Activation::Tanh, 1.0, rng)?;
    let mut head = GaussianHead::from_net(net, 0.0, (0.2, 0.8))?;
    for ls in &mut head.log_std {
        *ls = rng.random_range(-1.5..0.5);
    }
    let s = random_vec(rng, input, 1.0);
    let raw = random_vec(rng, outputs, 1.5);
    let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-0.1..0.1));
    let (lp0, _) = head.log_prob_raw(&s, &raw)?;
    let old = lp0 - 0.05;
    let loss = |lp: f64, ent: f64| {
        if ppo {
            clipped_surrogate(lp, old, a, 0.2).0 + b * ent
        } else {
            a * lp + b * ent
        }
    };
    let mut analytic = vec![0.0; head.num_params()];
    head.accumulate_grad(
        &s,
        &raw,
        |lp, _| if ppo { (clipped_surrogate(lp, old, a, 0.2).1, b) } else { (a, b) },
        &mut analytic,
    )?;
    let p0 = head.params_flat();
    let numeric = central_difference(&p0, FD_STEP, |p| {
        write_slices(head.param_slices_mut(), p)?;
        let (lp, ent) = head.log_prob_raw(&s, &raw)?;
        Ok(loss(lp, ent))
    })?;
    Ok(max_relative_error(&analytic, &numeric))
}

/// Worst finite-difference relative error per network kind over `instances`
/// random draws each.
pub fn gradient_errors(instances: usize, seed: u64) -> Result<Vec<(&'static str, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    type Instance = fn(&mut ChaCha8Rng) -> Result<f64>;
    let kinds: [(&'static str, Instance); 7] = [
        ("tanh mlp", |r| mlp_instance(r, Activation::Tanh)),
        ("linear mlp", |r| mlp_instance(r, Activation::Identity)),
        ("critic value loss", critic_instance),
        ("bernoulli head", |r| bernoulli_instance(r, false)),
        ("bernoulli clipped surrogate", |r| bernoulli_instance(r, true)),
        ("gaussian head", |r| gaussian_instance(r, false)),
        ("gaussian clipped surrogate", |r| gaussian_instance(r, true)),
    ];
    for (name, f) in kinds {
        let mut worst: f64 = 0.0;
        for _ in 0..instances {
            worst = worst.max(f(&mut rng)?);
        }
        out.push((name, worst));
    }
    Ok(out)
}

/// Criterion 3: analytic gradients against central differences.
pub fn gradient_checks() -> Check {
    check(
        3,
        "gradient checks",
        (|| {
            let errs = gradient_errors(20, 3)?;
            let worst = errs.iter().cloned().fold(("", 0.0), |acc, e| if e.1 > acc.1 { e } else { acc });
            Ok((
                errs.iter().all(|(_, e)| *e < GRAD_RTOL),
                format!("{} networks x 20 instances, worst {:.2e} ({})", errs.len(), worst.1, worst.0),
            ))
        })(),
    )
}

/// Explicit truncated sum `A_t = sum_l (gamma*lambda)^l delta_{t+l}` over one
/// episode that terminates at its last step.
pub fn gae_explicit(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| {
            let next = if t + 1 < n { values[t + 1] } else { 0.0 };
            rewards[t] + gamma * next - values[t]
        })
        .collect();
    (0..n).map(|t| (t..n).map(|k| (gamma * lambda).powi((k - t) as i32) * delta[k]).sum()).collect()
}

/// Criterion 4: recursive GAE against the explicit sum, plus both limits.
pub fn gae_equivalence() -> Check {
    check(
        4,
        "GAE equivalence",
        (|| {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let mut worst: f64 = 0.0;
            let mut limits_exact = true;
            for _ in 0..100 {
                let n = rng.random_range(1..=10);
                let r = random_vec(&mut rng, n, 5.0);
                let v = random_vec(&mut rng, n, 5.0);
                let mut dones = vec![false; n];
                dones[n - 1] = true;
                let (g, l) = (rng.random_range(0.5..1.0), rng.random_range(0.0..1.0));
                let (rec, _) = gae(&r, &v, &dones, g, l)?;
                let exp = gae_explicit(&r, &v, g, l);
                for (a, b) in rec.iter().zip(&exp) {
                    worst = worst.max((a - b).abs() / a.abs().max(1.0));
                }
                // lambda = 0: one-step residuals, computed the same way
                let (td, _) = gae(&r, &v, &dones, g, 0.0)?;
                for t in 0..n {
                    let next = if t + 1 < n { v[t + 1] } else { 0.0 };
                    limits_exact &= td[t] == r[t] + g * next - v[t];
                }
                // gamma = lambda = 1: Monte-Carlo return minus baseline
                let (mc, _) = gae(&r, &v, &dones, 1.0, 1.0)?;
                for t in 0..n {
                    let ret: f64 = r[t..].iter().sum();
                    limits_exact &= (mc[t] - (ret - v[t])).abs() <= GAE_TOL * ret.abs().max(1.0);
                }
            }
            Ok((
                worst <= GAE_TOL && limits_exact,
                format!("100 sequences, worst deviation {worst:.1e}; lambda limits exact: {limits_exact}"),
            ))
        })(),
    )
}

/// Composite Simpson rule on `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

/// Worst deviations from 1 of the Bernoulli enumeration and the squashed
/// Gaussian quadrature.
pub fn normalization_errors(seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_b: f64 = 0.0;
    for n in 1..=10 {
        let head = BernoulliHead::from_net(Mlp::new(&[3, 5, n], Activation::Tanh, 2.0, &mut rng)?);
        let s = random_vec(&mut rng, 3, 1.0);
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            let bits: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
            total += head.log_prob(&s, &bits)?.0.exp();
        }
        worst_b = worst_b.max((total - 1.0).abs());
    }
    let mut worst_g: f64 = 0.0;
    for _ in 0..10 {
        let net = Mlp::new(&[2, 4, 1], Activation::Tanh, 1.0, &mut rng)?;
        let mut head = GaussianHead::from_net(net, 0.0, (0.2, 0.8))?;
        head.log_std[0] = rng.random_range(-1.0..0.5);
        let s = random_vec(&mut rng, 2, 1.0);
        let density = |a: f64| -> f64 {
            if a <= 0.2 || a >= 0.8 {
                0.0
            } else {
                head.log_prob(&s, &[a]).map(|(lp, _)| lp.exp()).unwrap_or(f64::NAN)
            }
        };
        let total = simpson(density, 0.2, 0.8, 200_000);
        worst_g = worst_g.max((total - 1.0).abs());
    }
    Ok((worst_b, worst_g))
}

/// Criterion 5: probability mass and density integrate to one.
pub fn probability_normalization() -> Check {
    check(
        5,
        "probability normalization",
        (|| {
            let (b, g) = normalization_errors(5)?;
            Ok((b <= 1e-9 && g <= 1e-6, format!("Bernoulli N<=10 off by {b:.1e}, squashed Gaussian off by {g:.1e}")))
        })(),
    )
}

fn identical_logs(cfg: &ExperimentConfig, root: &std::path::Path) -> Result<(bool, String)> {
    execute_run(cfg, 11, &root.join("a"))?;
    execute_run(cfg, 11, &root.join("b"))?;
    let a = std::fs::read(root.join("a").join(LOG_FILE))?;
    let b = std::fs::read(root.join("b").join(LOG_FILE))?;
    Ok((a == b && !a.is_empty(), format!("log.csv {} bytes, identical: {}", a.len(), a == b)))
}

/// Criterion 6: two single-worker runs with one seed give identical log bytes.
pub fn determinism() -> Check {
    let mut cfg = ExperimentConfig::default();
    cfg.sys.num_ues = 3;
    cfg.hyper.workers = 1;
    cfg.hyper.total_steps = 1_000;
    cfg.hyper.eval_interval = 250;
    cfg.hyper.eval_episodes = 2;
    cfg.run.algorithm = Algorithm::Hmppo;
    let stamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
    let root = std::env::temp_dir().join(format!("peat-orch-determinism-{}-{stamp}", std::process::id()));
    let outcome = identical_logs(&cfg, &root);
    let _ = std::fs::remove_dir_all(&root);
    check(6, "determinism", outcome)
}

fn random_tasks<R: Rng>(rng: &mut R, n: usize) -> Vec<TaskDraw> {
    (0..n)
        .map(|_| TaskDraw {
            complexity: rng.random_range(1.0..10.0),
            data_size_bits: rng.random_range(2.4e9..4.0e9),
            avg_channel_gain: 10f64.powf(rng.random_range(-6.0..-4.0)),
            uplink_power: rng.random_range(0.2..1.0),
        })
        .collect()
}

/// Counts violations of bandwidth/power conservation, placement-mask
/// exclusivity and zero-cost reuse over `decisions` random steps.
pub fn invariant_violations(decisions: usize, seed: u64) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..decisions {
        let n = rng.random_range(1..=12);
        let cfg = SystemConfig::with_ues(n);
        let caches: Vec<Option<f64>> =
            (0..n).map(|_| rng.random_bool(0.7).then(|| rng.random_range(0.2..=0.8))).collect();
        let placement: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
        // half the local UEs propose something within tolerance of their cache
        let retention: Vec<f64> = (0..n)
            .map(|i| match caches[i] {
                Some(c) if rng.random_bool(0.5) => (c + rng.random_range(-0.01..=0.01)).clamp(0.2, 0.8),
                _ => rng.random_range(0.2..=0.8),
            })
            .collect();
        let tasks = random_tasks(&mut rng, n);
        let (out, next) = step_system(&cfg, &caches, &tasks, &JointDecision::new(placement.clone(), retention))?;

        let up: Vec<usize> = (0..n).filter(|&i| placement[i] == 1).collect();
        let down: Vec<usize> = (0..n).filter(|&i| placement[i] == 0 && out.switch_indicators[i] == 1).collect();
        let sum = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).sum::<f64>();
        if !up.is_empty() && rel(sum(&out.uplink_bandwidth_hz, &up), cfg.uplink_bandwidth_total) > 1e-12 {
            violations += 1;
        }
        if !down.is_empty()
            && (rel(sum(&out.downlink_bandwidth_hz, &down), cfg.downlink_bandwidth_total) > 1e-12
                || rel(sum(&out.downlink_power_w, &down), cfg.downlink_power_total) > 1e-12)
        {
            violations += 1;
        }
        for i in 0..n {
            let bad_mask = out.upload_delay_s[i] > 0.0 && out.download_delay_s[i] > 0.0
                || placement[i] == 1 && (out.download_delay_s[i] != 0.0 || out.switch_indicators[i] != 0)
                || placement[i] == 0 && (out.upload_delay_s[i] != 0.0 || out.uplink_bandwidth_hz[i] != 0.0)
                || !down.contains(&i) && (out.downlink_bandwidth_hz[i] != 0.0 || out.downlink_power_w[i] != 0.0);
            let reuse = placement[i] == 0 && out.switch_indicators[i] == 0;
            let bad_reuse = reuse
                && (out.per_ue_delay_s[i] != 0.0
                    || Some(out.effective_retention[i]) != caches[i]
                    || next[i] != caches[i]);
            if bad_mask || bad_reuse {
                violations += 1;
            }
        }
    }
    Ok(violations)
}

/// Criterion 7: conservation and masking invariants under fuzzing.
pub fn invariant_fuzz() -> Check {
    check(
        7,
        "conservation and zero-cost invariants",
        (|| {
            let v = invariant_violations(10_000, 7)?;
            Ok((v == 0, format!("10000 random decisions, {v} violations")))
        })(),
    )
}

/// Criterion 12: the two-armed bandit is solved within 200 updates.
pub fn bandit() -> Check {
    check(
        12,
        "bandit sanity",
        (|| {
            let r = bandit_sanity(12, 200)?;
            Ok((r.reached, format!("p(arm 1) = {:.4} after {} updates", r.p_arm1, r.updates)))
        })(),
    )
}

/// Replays the all-local, constant-retention policy and counts switches; it
/// must be exactly one cold start per UE.
pub fn cold_start_switches(config: &SystemConfig, seed: u64) -> Result<usize> {
    let (mut env, _) = EpisodeState::reset(config, seed)?;
    let d = JointDecision::new(vec![0; config.num_ues], vec![0.8; config.num_ues]);
    while !env.is_done() {
        env.step(&d)?;
    }
    Ok(env.metrics()?.switch_count)
}

/// Every fast check, in criterion order.
pub fn run_selftest() -> Vec<Check> {
    vec![
        formula_oracles(),
        polynomial_anchor(),
        gradient_checks(),
        gae_equivalence(),
        probability_normalization(),
        determinism(),
        invariant_fuzz(),
        bandit(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squashed_centre_oracle() {
        let net = Mlp::zeros(&[1, 1], Activation::Identity).unwrap();
        let head = GaussianHead::from_net(net, 0.0, (0.2, 0.8)).unwrap();
        let (lp, _) = head.log_prob(&[0.0], &[0.5]).unwrap();
        assert!(rel(lp, oracle::SQUASHED_CENTRE_LOGPROB) < 1e-12);
    }

    #[test]
    fn rounded_hand_figures() {
        // four-digit hand arithmetic and the tolerance it was given
        assert!((oracle::UPLOAD_DELAY - 3601.2).abs() <= 0.5);
        assert!((oracle::DOWNLOAD_DELAY - 1163.5).abs() <= 0.5);
        assert!((oracle::DOWNLINK_RATE / 3.7128e7 - 1.0).abs() < 1e-4);
        // the hand figure 8.8858e5 +- 10 for the uplink rate rests on log2(1 + 5e10) = 35.543,
        // which is 35.5412 to five significant digits
        assert!((oracle::UPLINK_RATE / 2.5e4 - 35.5412).abs() < 1e-4);
        assert!((oracle::UPLINK_RATE - 8.8858e5).abs() > 10.0);
    }

    #[test]
    fn explicit_gae_matches_hand_values() {
        let a = gae_explicit(&[1.0, 1.0], &[0.5, 0.4], 0.99, 0.95);
        assert!((a[0] - 1.4603).abs() < 1e-12 && (a[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn cold_start_only() {
        assert_eq!(cold_start_switches(&SystemConfig::default(), 3).unwrap(), 8);
    }

    #[test]
    fn fast_checks_pass() {
        for c in [formula_oracles(), polynomial_anchor(), gae_equivalence(), probability_normalization()] {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn gradient_suite_passes() {
        let errs = gradient_errors(5, 1).unwrap();
        for (name, e) in errs {
            assert!(e < GRAD_RTOL, "{name}: {e}");
        }
    }

    #[test]
    fn fuzz_finds_no_violations() {
        assert_eq!(invariant_violations(500, 1).unwrap(), 0);
    }
}
