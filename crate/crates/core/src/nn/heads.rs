//! Stochastic policy heads: factorised Bernoulli for placement bits and a
//! tanh-squashed diagonal Gaussian for bounded retentions.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Mlp};
use crate::error::{check_len, Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Inward clamp applied to retentions sitting exactly on a bound.
pub const BOUND_CLAMP: f64 = 1e-6;

/// Keeps squashed samples strictly inside the bounds once `tanh` saturates.
const SQUASH_MARGIN: f64 = 1e-12;

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(sech^2 u)`, stable for large `|u|`.
#[inline]
fn log_sech2(u: f64) -> f64 {
    let a = u.abs();
    2.0 * (LN_2 - a - (-2.0 * a).exp().ln_1p())
}

fn bernoulli_logp(logit: f64, bit: u8) -> f64 {
    if bit == 1 {
        -softplus(-logit)
    } else {
        -softplus(logit)
    }
}

fn bernoulli_entropy(logit: f64) -> f64 {
    let p = sigmoid(logit);
    // H = softplus(l) - p*l, valid for either sign of l
    softplus(logit) - p * logit
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliSample {
    pub bits: Vec<u8>,
    pub logprob: f64,
    pub entropy: f64,
}

/// `N` independent Bernoulli variables with logits from one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliHead {
    pub net: Mlp,
}

impl BernoulliHead {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: &[usize], outputs: usize, rng: &mut R) -> Result<Self> {
        let sizes = [&[input][..], hidden, &[outputs]].concat();
        Ok(Self { net: Mlp::new(&sizes, Activation::Tanh, 0.01, rng)? })
    }

    pub fn from_net(net: Mlp) -> Self {
        Self { net }
    }

    pub fn num_actions(&self) -> usize {
        self.net.output_size()
    }

    pub fn num_params(&self) -> usize {
        self.net.num_params()
    }

    pub fn logits(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.net.predict(state)
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<BernoulliSample> {
        let logits = self.logits(state)?;
        let bits: Vec<u8> = logits.iter().map(|&l| u8::from(rng.random::<f64>() < sigmoid(l))).collect();
        let logprob = logits.iter().zip(&bits).map(|(&l, &b)| bernoulli_logp(l, b)).sum();
        let entropy = logits.iter().map(|&l| bernoulli_entropy(l)).sum();
        Ok(BernoulliSample { bits, logprob, entropy })
    }

    /// Most likely bits (probability threshold 0.5).
    pub fn mode(&self, state: &[f64]) -> Result<Vec<u8>> {
        Ok(self.logits(state)?.iter().map(|&l| u8::from(l > 0.0)).collect())
    }

    pub fn log_prob(&self, state: &[f64], bits: &[u8]) -> Result<(f64, f64)> {
        let logits = self.logits(state)?;
        check_len("bernoulli action", logits.len(), bits.len())?;
        let lp = logits.iter().zip(bits).map(|(&l, &b)| bernoulli_logp(l, b)).sum();
        let ent = logits.iter().map(|&l| bernoulli_entropy(l)).sum();
        Ok((lp, ent))
    }

    /// Evaluates `(logprob, entropy)` at `bits`, asks `coefs` for the loss
    /// derivatives `(dL/dlogprob, dL/dentropy)` and adds the resulting
    /// parameter gradient into `grads`.
    pub fn accumulate_grad<F>(&self, state: &[f64], bits: &[u8], coefs: F, grads: &mut [f64]) -> Result<(f64, f64)>
    where
        F: FnOnce(f64, f64) -> (f64, f64),
    {
        let (logits, cache) = self.net.forward(state)?;
        check_len("bernoulli action", logits.len(), bits.len())?;
        let lp: f64 = logits.iter().zip(bits).map(|(&l, &b)| bernoulli_logp(l, b)).sum();
        let ent: f64 = logits.iter().map(|&l| bernoulli_entropy(l)).sum();
        let (lp_coef, ent_coef) = coefs(lp, ent);
        let out_grad: Vec<f64> = logits
            .iter()
            .zip(bits)
            .map(|(&l, &b)| {
                let p = sigmoid(l);
                lp_coef * (f64::from(b) - p) - ent_coef * l * p * (1.0 - p)
            })
            .collect();
        self.net.accumulate_backward(&cache, &out_grad, grads)?;
        Ok((lp, ent))
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.net.params_mut()]
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.net.params().to_vec()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSample {
    /// Squashed actions inside `(lo, hi)`.
    pub retentions: Vec<f64>,
    /// Pre-squash Gaussian draws.
    pub raw: Vec<f64>,
    pub logprob: f64,
    pub entropy: f64,
}

/// Diagonal Gaussian in an unbounded space, squashed by
/// `a = lo + (hi - lo) * (tanh(u) + 1) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianHead {
    pub mean: Mlp,
    pub log_std: Vec<f64>,
    pub bounds: (f64, f64),
}

impl GaussianHead {
    pub fn new<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        outputs: usize,
        bounds: (f64, f64),
        init_log_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let sizes = [&[input][..], hidden, &[outputs]].concat();
        Self::from_net(Mlp::new(&sizes, Activation::Tanh, 0.01, rng)?, init_log_std, bounds)
    }

    pub fn from_net(mean: Mlp, init_log_std: f64, bounds: (f64, f64)) -> Result<Self> {
        if !(bounds.0 < bounds.1) {
            return Err(Error::InvalidArgument(format!("bounds must satisfy lo < hi, got {bounds:?}")));
        }
        let n = mean.output_size();
        Ok(Self { mean, log_std: vec![init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); n], bounds })
    }

    pub fn num_actions(&self) -> usize {
        self.mean.output_size()
    }

    pub fn num_params(&self) -> usize {
        self.mean.num_params() + self.log_std.len()
    }

    fn half_width(&self) -> f64 {
        0.5 * (self.bounds.1 - self.bounds.0)
    }

    fn effective_log_std(&self, i: usize) -> f64 {
        self.log_std[i].clamp(LOG_STD_MIN, LOG_STD_MAX)
    }

    pub fn squash(&self, u: f64) -> f64 {
        let unit = (0.5 * (u.tanh() + 1.0)).clamp(SQUASH_MARGIN, 1.0 - SQUASH_MARGIN);
        self.bounds.0 + (self.bounds.1 - self.bounds.0) * unit
    }

    pub fn unsquash(&self, a: f64) -> f64 {
        let (lo, hi) = self.bounds;
        let a = if a <= lo {
            lo + BOUND_CLAMP
        } else if a >= hi {
            hi - BOUND_CLAMP
        } else {
            a
        };
        (2.0 * (a - lo) / (hi - lo) - 1.0).atanh()
    }

    fn entropy(&self) -> f64 {
        (0..self.num_actions()).map(|i| 0.5 + 0.5 * (2.0 * PI).ln() + self.effective_log_std(i)).sum()
    }

    fn logprob_raw(&self, means: &[f64], raw: &[f64]) -> f64 {
        let log_half = self.half_width().ln();
        means
            .iter()
            .zip(raw)
            .enumerate()
            .map(|(i, (&mu, &u))| {
                let ls = self.effective_log_std(i);
                let z = (u - mu) / ls.exp();
                -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln() - log_half - log_sech2(u)
            })
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<GaussianSample> {
        let means = self.mean.predict(state)?;
        let raw: Vec<f64> = means
            .iter()
            .enumerate()
            .map(|(i, &mu)| mu + self.effective_log_std(i).exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let retentions = raw.iter().map(|&u| self.squash(u)).collect();
        Ok(GaussianSample { logprob: self.logprob_raw(&means, &raw), entropy: self.entropy(), retentions, raw })
    }

    /// Squashed mean.
    pub fn mode(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mean.predict(state)?.iter().map(|&u| self.squash(u)).collect())
    }

    /// Log-density of squashed actions (inverse-squashed internally).
    pub fn log_prob(&self, state: &[f64], retentions: &[f64]) -> Result<(f64, f64)> {
        let raw: Vec<f64> = retentions.iter().map(|&a| self.unsquash(a)).collect();
        self.log_prob_raw(state, &raw)
    }

    /// Log-density of the squashed action whose pre-squash value is `raw`.
    pub fn log_prob_raw(&self, state: &[f64], raw: &[f64]) -> Result<(f64, f64)> {
        let means = self.mean.predict(state)?;
        check_len("gaussian action", means.len(), raw.len())?;
        Ok((self.logprob_raw(&means, raw), self.entropy()))
    }

    /// Same contract as [`BernoulliHead::accumulate_grad`], with `raw` the
    /// pre-squash action. Gradient layout: mean-network parameters, then
    /// log-std entries.
    pub fn accumulate_grad<F>(&self, state: &[f64], raw: &[f64], coefs: F, grads: &mut [f64]) -> Result<(f64, f64)>
    where
        F: FnOnce(f64, f64) -> (f64, f64),
    {
        check_len("gaussian gradient buffer", self.num_params(), grads.len())?;
        let (means, cache) = self.mean.forward(state)?;
        check_len("gaussian action", means.len(), raw.len())?;
        let lp = self.logprob_raw(&means, raw);
        let ent = self.entropy();
        let (lp_coef, ent_coef) = coefs(lp, ent);
        let net_params = self.mean.num_params();
        let mut out_grad = vec![0.0; means.len()];
        for i in 0..means.len() {
            let ls = self.effective_log_std(i);
            let var = (2.0 * ls).exp();
            let diff = raw[i] - means[i];
            out_grad[i] = lp_coef * diff / var;
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&self.log_std[i]) {
                grads[net_params + i] += lp_coef * (diff * diff / var - 1.0) + ent_coef;
            }
        }
        self.mean.accumulate_backward(&cache, &out_grad, &mut grads[..net_params])?;
        Ok((lp, ent))
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let Self { mean, log_std, .. } = self;
        vec![mean.params_mut(), log_std.as_mut_slice()]
    }

    pub fn params_flat(&self) -> Vec<f64> {
        [self.mean.params(), &self.log_std[..]].concat()
    }

    pub fn clamp_log_std(&mut self) {
        for ls in &mut self.log_std {
            *ls = ls.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_bernoulli(n: usize) -> BernoulliHead {
        BernoulliHead::from_net(Mlp::zeros(&[2, n], Activation::Tanh).unwrap())
    }

    #[test]
    fn fair_coin_logprob() {
        let head = zero_bernoulli(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = head.sample(&[0.3, 0.1], &mut rng).unwrap();
        assert!((s.logprob - 0.5f64.ln()).abs() < 1e-15);
        assert!((s.entropy - LN_2).abs() < 1e-15);
        let head = zero_bernoulli(5);
        let s = head.sample(&[0.3, 0.1], &mut rng).unwrap();
        assert!((s.logprob - 5.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_logit() {
        let mut net = Mlp::zeros(&[1, 1], Activation::Tanh).unwrap();
        net.set_bias(0, 0, 20.0);
        let head = BernoulliHead::from_net(net);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let s = head.sample(&[0.0], &mut rng).unwrap();
            assert_eq!(s.bits, vec![1]);
            assert!(s.logprob.abs() < 1e-8);
        }
        assert_eq!(head.mode(&[0.0]).unwrap(), vec![1]);
    }

    #[test]
    fn squash_center_logprob() {
        let head = GaussianHead::from_net(Mlp::zeros(&[1, 1], Activation::Tanh).unwrap(), 0.0, (0.2, 0.8)).unwrap();
        let (lp, _) = head.log_prob_raw(&[0.0], &[0.0]).unwrap();
        let expected = -0.5 * (2.0 * PI).ln() - 0.3f64.ln();
        assert!((lp - expected).abs() < 1e-14);
        assert!((lp - 0.2851).abs() < 1e-4);
        assert!((head.squash(0.0) - 0.5).abs() < 1e-15);
        let (lp2, _) = head.log_prob(&[0.0], &[0.5]).unwrap();
        assert!((lp2 - lp).abs() < 1e-12);
    }

    #[test]
    fn samples_stay_inside_bounds() {
        let mut net = Mlp::zeros(&[1, 3], Activation::Tanh).unwrap();
        net.set_bias(0, 0, 40.0);
        net.set_bias(0, 1, -40.0);
        let head = GaussianHead::from_net(net, 2.0, (0.2, 0.8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let s = head.sample(&[0.0], &mut rng).unwrap();
            assert!(s.retentions.iter().all(|&a| a > 0.2 && a < 0.8));
            assert!(s.logprob.is_finite());
        }
    }

    #[test]
    fn bound_actions_are_clamped() {
        let head = GaussianHead::from_net(Mlp::zeros(&[1, 1], Activation::Tanh).unwrap(), 0.0, (0.2, 0.8)).unwrap();
        let (lp, _) = head.log_prob(&[0.0], &[0.8]).unwrap();
        assert!(lp.is_finite());
        assert!((head.unsquash(0.2) - head.unsquash(0.2 + BOUND_CLAMP)).abs() < 1e-12);
    }

    #[test]
    fn log_std_is_clamped() {
        let mut head = GaussianHead::from_net(Mlp::zeros(&[1, 2], Activation::Tanh).unwrap(), 9.0, (0.2, 0.8)).unwrap();
        assert_eq!(head.log_std, vec![LOG_STD_MAX; 2]);
        head.log_std[0] = -30.0;
        head.clamp_log_std();
        assert_eq!(head.log_std[0], LOG_STD_MIN);
        assert!(GaussianHead::from_net(Mlp::zeros(&[1, 1], Activation::Tanh).unwrap(), 0.0, (0.8, 0.2)).is_err());
    }
}
