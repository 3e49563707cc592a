use crate::error::{Error, Result};

/// Advantages by the backward recursion `A_t = delta_t + gamma*lambda*A_{t+1}`,
/// restarted at every terminal step (terminal steps bootstrap with 0).
///
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    gae_bootstrapped(rewards, values, dones, &vec![0.0; rewards.len()], gamma, lambda)
}

/// As [`gae`], but a step flagged done bootstraps with `tail_values[t]`, the
/// critic's estimate of the state reached when the episode was cut off.
pub fn gae_bootstrapped(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    tail_values: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n || tail_values.len() != n {
        return Err(Error::Contract(format!(
            "gae inputs disagree: {} rewards, {} values, {} dones, {} tail values",
            n,
            values.len(),
            dones.len(),
            tail_values.len()
        )));
    }
    if n > 0 && !dones[n - 1] {
        return Err(Error::Contract("rollout must end on an episode boundary".into()));
    }
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if dones[t] { tail_values[t] } else { values[t + 1] };
        if dones[t] {
            running = 0.0;
        }
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Rescales to zero mean and unit (population) standard deviation.
pub fn normalize(xs: &mut [f64]) {
    if xs.len() < 2 {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    for x in xs.iter_mut() {
        *x = (*x - mean) / (std + 1e-8);
    }
}

/// Per-step transitions of one or more complete episodes.
///
/// States are stored already normalised. `values[k]` holds critic `k`'s
/// collection-time estimates: one critic for the centralised learner, two
/// for independent learners.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub s1: Vec<Vec<f64>>,
    pub s2: Vec<Vec<f64>>,
    pub a1: Vec<Vec<u8>>,
    pub a2: Vec<Vec<f64>>,
    /// Pre-squash draws behind `a2`.
    pub a2_raw: Vec<Vec<f64>>,
    pub logp1: Vec<f64>,
    pub logp2: Vec<f64>,
    /// Rewards as seen by the learner (already multiplied by the reward scale).
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub values: Vec<Vec<f64>>,
    /// Per critic: estimate at the post-episode state for steps that end an
    /// episode, 0 elsewhere. Empty means every episode end is terminal.
    pub tail_values: Vec<Vec<f64>>,
    pub advantages: Vec<Vec<f64>>,
    pub returns: Vec<Vec<f64>>,
}

impl RolloutBuffer {
    pub fn with_critics(num_critics: usize) -> Self {
        Self { values: vec![Vec::new(); num_critics], tail_values: vec![Vec::new(); num_critics], ..Self::default() }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn num_critics(&self) -> usize {
        self.values.len()
    }

    pub fn has_advantages(&self) -> bool {
        self.advantages.len() == self.values.len() && self.advantages.iter().all(|a| a.len() == self.len())
    }

    /// Appends another buffer (e.g. a second worker's episode).
    pub fn extend(&mut self, other: RolloutBuffer) {
        self.s1.extend(other.s1);
        self.s2.extend(other.s2);
        self.a1.extend(other.a1);
        self.a2.extend(other.a2);
        self.a2_raw.extend(other.a2_raw);
        self.logp1.extend(other.logp1);
        self.logp2.extend(other.logp2);
        self.rewards.extend(other.rewards);
        self.dones.extend(other.dones);
        if self.values.is_empty() {
            self.values = other.values;
            self.tail_values = other.tail_values;
        } else {
            for (mine, theirs) in self.values.iter_mut().zip(other.values) {
                mine.extend(theirs);
            }
            for (mine, theirs) in self.tail_values.iter_mut().zip(other.tail_values) {
                mine.extend(theirs);
            }
        }
        self.advantages.clear();
        self.returns.clear();
    }

    fn check_filled(&self) -> Result<()> {
        let n = self.len();
        let lens = [
            self.s1.len(),
            self.s2.len(),
            self.a1.len(),
            self.a2.len(),
            self.a2_raw.len(),
            self.logp1.len(),
            self.logp2.len(),
            self.dones.len(),
        ];
        if n == 0
            || lens.iter().any(|&l| l != n)
            || self.values.iter().any(|v| v.len() != n)
            || self.tail_values.iter().any(|v| !v.is_empty() && v.len() != n)
        {
            return Err(Error::Contract("rollout buffer is empty or partially filled".into()));
        }
        if self.values.is_empty() {
            return Err(Error::Contract("rollout buffer has no value estimates".into()));
        }
        Ok(())
    }

    /// Fills `advantages` and `returns` for every critic. Normalisation, if
    /// requested, is applied to the advantages after the returns are formed.
    pub fn compute_gae(&mut self, gamma: f64, lambda: f64, normalize_advantages: bool) -> Result<()> {
        self.check_filled()?;
        self.advantages.clear();
        self.returns.clear();
        let zeros = vec![0.0; self.len()];
        for (k, values) in self.values.iter().enumerate() {
            let tail = match self.tail_values.get(k) {
                Some(t) if !t.is_empty() => t,
                _ => &zeros,
            };
            let (mut adv, ret) = gae_bootstrapped(&self.rewards, values, &self.dones, tail, gamma, lambda)?;
            if normalize_advantages {
                normalize(&mut adv);
            }
            self.advantages.push(adv);
            self.returns.push(ret);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_step_hand_recursion() {
        let (adv, ret) = gae(&[1.0, 1.0], &[0.5, 0.4], &[false, true], 0.99, 0.95).unwrap();
        assert!((adv[1] - 0.6).abs() < 1e-15);
        assert!((adv[0] - (0.896 + 0.99 * 0.95 * 0.6)).abs() < 1e-14);
        assert!((adv[0] - 1.4603).abs() < 1e-12);
        assert!((ret[0] - 1.9603).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_is_td_residual() {
        let r = [0.3, -1.0, 2.0];
        let v = [0.1, 0.7, -0.2];
        let (adv, _) = gae(&r, &v, &[false, false, true], 0.9, 0.0).unwrap();
        assert_eq!(adv[0], 0.3 + 0.9 * 0.7 - 0.1);
        assert_eq!(adv[1], -1.0 + 0.9 * -0.2 - 0.7);
        assert_eq!(adv[2], 2.0 - -0.2);
    }

    #[test]
    fn episodes_do_not_leak() {
        let (a, _) = gae(&[1.0, 5.0], &[0.0, 0.0], &[true, true], 0.99, 0.95).unwrap();
        assert_eq!(a, vec![1.0, 5.0]);
    }

    #[test]
    fn unfinished_rollout_rejected() {
        assert!(gae(&[1.0], &[0.0], &[false], 0.99, 0.95).is_err());
        assert!(gae(&[1.0], &[0.0, 1.0], &[true], 0.99, 0.95).is_err());
        let mut b = RolloutBuffer::with_critics(1);
        assert!(b.compute_gae(0.99, 0.95, true).is_err());
    }

    #[test]
    fn normalization_moments() {
        let mut xs = vec![1.0, 2.0, 3.0, 10.0];
        normalize(&mut xs);
        let mean: f64 = xs.iter().sum::<f64>() / 4.0;
        let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-6);
    }
}
