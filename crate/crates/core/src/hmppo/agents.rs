use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::RolloutBuffer;
use super::loss::{clipped_surrogate, critic_grad};
use super::HyperParams;
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, sigmoid, Activation, AdamState, BernoulliHead, GaussianHead, Mlp};
use crate::sysmodel::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticLayout {
    /// One critic on `{s1; s2}` shared by both actors.
    Centralized,
    /// Critic 0 on `s1` for actor 1, critic 1 on `s2` for actor 2.
    Independent,
}

impl CriticLayout {
    pub fn num_critics(self) -> usize {
        match self {
            CriticLayout::Centralized => 1,
            CriticLayout::Independent => 2,
        }
    }

    /// Which critic's advantages drive actor `actor` (0 or 1).
    pub fn critic_for_actor(self, actor: usize) -> usize {
        match self {
            CriticLayout::Centralized => 0,
            CriticLayout::Independent => actor,
        }
    }
}

/// Both actors, the critic(s) and one optimizer per network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agents {
    pub layout: CriticLayout,
    pub actor1: BernoulliHead,
    pub actor2: GaussianHead,
    pub critics: Vec<Mlp>,
    pub opt_actor1: AdamState,
    pub opt_actor2: AdamState,
    pub opt_critics: Vec<AdamState>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub actor1_loss: f64,
    pub actor2_loss: f64,
    pub critic_loss: f64,
    pub entropy1: f64,
    pub entropy2: f64,
    pub ratio1_mean: f64,
    pub ratio2_mean: f64,
    pub approx_kl1: f64,
    pub approx_kl2: f64,
    /// Largest `|r - 1|` seen in the first minibatch of the first epoch.
    pub first_minibatch_max_ratio_dev: f64,
}

impl Agents {
    /// Rescales every optimizer's step size to `fraction` of the base rates.
    pub fn set_lr_fraction(&mut self, hyper: &HyperParams, fraction: f64) {
        self.opt_actor1.lr = hyper.actor_lr * fraction;
        self.opt_actor2.lr = hyper.actor_lr * fraction;
        for opt in &mut self.opt_critics {
            opt.lr = hyper.critic_lr * fraction;
        }
    }

    pub fn new<R: Rng + ?Sized>(
        s1_dim: usize,
        s2_dim: usize,
        num_actions: usize,
        bounds: (f64, f64),
        hyper: &HyperParams,
        layout: CriticLayout,
        rng: &mut R,
    ) -> Result<Self> {
        let actor1 = BernoulliHead::new(s1_dim, &hyper.hidden, num_actions, rng)?;
        let actor2 = GaussianHead::new(s2_dim, &hyper.hidden, num_actions, bounds, hyper.init_log_std, rng)?;
        let critic_inputs = match layout {
            CriticLayout::Centralized => vec![s1_dim + s2_dim],
            CriticLayout::Independent => vec![s1_dim, s2_dim],
        };
        let critics = critic_inputs
            .into_iter()
            .map(|d| Mlp::new(&[&[d][..], &hyper.hidden, &[1]].concat(), Activation::Tanh, 1.0, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            opt_actor1: AdamState::new(actor1.num_params(), hyper.actor_lr),
            opt_actor2: AdamState::new(actor2.num_params(), hyper.actor_lr),
            opt_critics: critics.iter().map(|c| AdamState::new(c.num_params(), hyper.critic_lr)).collect(),
            layout,
            actor1,
            actor2,
            critics,
        })
    }

    /// Networks sized for a fleet: `s1` has `4N` slots, `s2` has `3N`.
    pub fn for_config<R: Rng + ?Sized>(
        config: &SystemConfig,
        hyper: &HyperParams,
        layout: CriticLayout,
        rng: &mut R,
    ) -> Result<Self> {
        let n = config.num_ues;
        Self::new(4 * n, 3 * n, n, (config.retention_min, config.retention_max), hyper, layout, rng)
    }

    pub fn critic_input(&self, critic: usize, s1: &[f64], s2: &[f64]) -> Vec<f64> {
        match (self.layout, critic) {
            (CriticLayout::Centralized, _) => [s1, s2].concat(),
            (CriticLayout::Independent, 0) => s1.to_vec(),
            (CriticLayout::Independent, _) => s2.to_vec(),
        }
    }

    /// Current estimate of every critic.
    pub fn values(&self, s1: &[f64], s2: &[f64]) -> Result<Vec<f64>> {
        (0..self.critics.len()).map(|k| Ok(self.critics[k].predict(&self.critic_input(k, s1, s2))?[0])).collect()
    }

    pub fn all_params_finite(&self) -> bool {
        self.actor1.params_flat().iter().all(|p| p.is_finite())
            && self.actor2.params_flat().iter().all(|p| p.is_finite())
            && self.critics.iter().all(|c| c.params().iter().all(|p| p.is_finite()))
    }

    /// PPO update over `epochs` passes of shuffled minibatches, one optimizer
    /// step per network per minibatch.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        buffer: &RolloutBuffer,
        hyper: &HyperParams,
        rng: &mut R,
    ) -> Result<UpdateStats> {
        if !buffer.has_advantages() || buffer.num_critics() != self.critics.len() {
            return Err(Error::Contract("update requires advantages for every critic".into()));
        }
        let n = buffer.len();
        let eps = hyper.clip_eps;
        let adv1 = &buffer.advantages[self.layout.critic_for_actor(0)];
        let adv2 = &buffer.advantages[self.layout.critic_for_actor(1)];

        let mut idx: Vec<usize> = (0..n).collect();
        let mut stats = UpdateStats::default();
        let mut batches = 0usize;
        let mut first = true;

        for _ in 0..hyper.epochs {
            idx.shuffle(rng);
            for chunk in idx.chunks(hyper.minibatch_size) {
                let b = chunk.len() as f64;
                let mut max_dev: f64 = 0.0;
                let (mut l1, mut l2, mut lc) = (0.0, 0.0, 0.0);
                let (mut e1, mut e2) = (0.0, 0.0);
                let (mut r1, mut r2, mut kl1, mut kl2) = (0.0, 0.0, 0.0, 0.0);

                let mut g1 = vec![0.0; self.actor1.num_params()];
                for &i in chunk {
                    let old = buffer.logp1[i];
                    let a = adv1[i];
                    let (_, ent) = self.actor1.accumulate_grad(
                        &buffer.s1[i],
                        &buffer.a1[i],
                        |lp, _| {
                            let (loss, dloss) = clipped_surrogate(lp, old, a, eps);
                            let r = (lp - old).exp();
                            l1 += loss;
                            r1 += r;
                            kl1 += old - lp;
                            max_dev = max_dev.max((r - 1.0).abs());
                            (dloss / b, -hyper.entropy_coef / b)
                        },
                        &mut g1,
                    )?;
                    e1 += ent;
                }

                let mut g2 = vec![0.0; self.actor2.num_params()];
                for &i in chunk {
                    let old = buffer.logp2[i];
                    let a = adv2[i];
                    let (_, ent) = self.actor2.accumulate_grad(
                        &buffer.s2[i],
                        &buffer.a2_raw[i],
                        |lp, _| {
                            let (loss, dloss) = clipped_surrogate(lp, old, a, eps);
                            let r = (lp - old).exp();
                            l2 += loss;
                            r2 += r;
                            kl2 += old - lp;
                            max_dev = max_dev.max((r - 1.0).abs());
                            (dloss / b, -hyper.entropy_coef / b)
                        },
                        &mut g2,
                    )?;
                    e2 += ent;
                }

                let mut gcs: Vec<Vec<f64>> = self.critics.iter().map(|c| vec![0.0; c.num_params()]).collect();
                for (k, critic) in self.critics.iter().enumerate() {
                    for &i in chunk {
                        let input = self.critic_input(k, &buffer.s1[i], &buffer.s2[i]);
                        let (out, cache) = critic.forward(&input)?;
                        let target = buffer.returns[k][i];
                        lc += hyper.value_coef * (out[0] - target).powi(2) / b;
                        let g = hyper.value_coef * critic_grad(out[0], target) / b;
                        critic.accumulate_backward(&cache, &[g], &mut gcs[k])?;
                    }
                }

                let finite = |g: &[f64]| g.iter().all(|v| v.is_finite());
                if !(l1.is_finite() && l2.is_finite() && lc.is_finite())
                    || !finite(&g1)
                    || !finite(&g2)
                    || !gcs.iter().all(|g| finite(g))
                {
                    return Err(Error::NonFinite(format!(
                        "update aborted: actor1 loss {l1}, actor2 loss {l2}, critic loss {lc}, \
                         ratio sums ({r1}, {r2}), minibatch {batches}"
                    )));
                }

                clip_grad_norm(&mut g1, hyper.max_grad_norm);
                clip_grad_norm(&mut g2, hyper.max_grad_norm);
                self.opt_actor1.step_slices(&mut self.actor1.param_slices_mut(), &g1)?;
                self.opt_actor2.step_slices(&mut self.actor2.param_slices_mut(), &g2)?;
                self.actor2.clamp_log_std();
                for (k, g) in gcs.iter_mut().enumerate() {
                    clip_grad_norm(g, hyper.max_grad_norm);
                    self.opt_critics[k].step(self.critics[k].params_mut(), g)?;
                }

                if first {
                    stats.first_minibatch_max_ratio_dev = max_dev;
                    first = false;
                }
                stats.actor1_loss += l1 / b;
                stats.actor2_loss += l2 / b;
                // summed over critics
                stats.critic_loss += lc;
                stats.entropy1 += e1 / b;
                stats.entropy2 += e2 / b;
                stats.ratio1_mean += r1 / b;
                stats.ratio2_mean += r2 / b;
                stats.approx_kl1 += kl1 / b;
                stats.approx_kl2 += kl2 / b;
                batches += 1;
            }
        }

        let m = batches.max(1) as f64;
        stats.actor1_loss /= m;
        stats.actor2_loss /= m;
        stats.critic_loss /= m;
        stats.entropy1 /= m;
        stats.entropy2 /= m;
        stats.ratio1_mean /= m;
        stats.ratio2_mean /= m;
        stats.approx_kl1 /= m;
        stats.approx_kl2 /= m;
        Ok(stats)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditReport {
    pub updates: usize,
    pub p_arm1: f64,
    pub reached: bool,
}

/// Stateless two-armed bandit (arm 1 pays 1, arm 0 pays 0) solved with the
/// discrete actor through the regular rollout/GAE/update path. Stops as soon
/// as `p(arm 1) > 0.95`.
pub fn bandit_sanity(seed: u64, max_updates: usize) -> Result<BanditReport> {
    let hyper = HyperParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents = Agents::new(1, 1, 1, (0.2, 0.8), &hyper, CriticLayout::Centralized, &mut rng)?;
    let s1 = vec![1.0];
    let s2 = vec![1.0];
    let p_arm1 = |agents: &Agents| -> Result<f64> { Ok(sigmoid(agents.actor1.logits(&s1)?[0])) };

    for updates in 0..=max_updates {
        let p = p_arm1(&agents)?;
        if p > 0.95 {
            return Ok(BanditReport { updates, p_arm1: p, reached: true });
        }
        if updates == max_updates {
            return Ok(BanditReport { updates, p_arm1: p, reached: false });
        }
        let mut buf = RolloutBuffer::with_critics(1);
        for _ in 0..hyper.minibatch_size {
            let a1 = agents.actor1.sample(&s1, &mut rng)?;
            let a2 = agents.actor2.sample(&s2, &mut rng)?;
            let v = agents.values(&s1, &s2)?;
            buf.s1.push(s1.clone());
            buf.s2.push(s2.clone());
            buf.rewards.push(f64::from(a1.bits[0]));
            buf.a1.push(a1.bits);
            buf.logp1.push(a1.logprob);
            buf.a2.push(a2.retentions);
            buf.a2_raw.push(a2.raw);
            buf.logp2.push(a2.logprob);
            buf.dones.push(true);
            buf.values[0].push(v[0]);
        }
        buf.compute_gae(hyper.gamma, hyper.gae_lambda, hyper.normalize_advantages)?;
        agents.update(&buf, &hyper, &mut rng)?;
    }
    unreachable!("loop returns on its last iteration")
}
