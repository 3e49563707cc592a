/// Clipped surrogate for one sample: returns `(loss, d loss / d logp_new)`
/// where `loss = -min(r*A, clip(r, 1-eps, 1+eps)*A)` and `r = exp(logp_new - logp_old)`.
pub fn clipped_surrogate(logp_new: f64, logp_old: f64, advantage: f64, eps: f64) -> (f64, f64) {
    let r = (logp_new - logp_old).exp();
    let unclipped = r * advantage;
    let clipped = r.clamp(1.0 - eps, 1.0 + eps) * advantage;
    if unclipped <= clipped {
        (-unclipped, -unclipped)
    } else {
        (-clipped, 0.0)
    }
}

/// Minibatch mean of [`clipped_surrogate`]; the entropy bonus is applied by the caller.
pub fn actor_loss(logp_new: &[f64], logp_old: &[f64], advantage: &[f64], eps: f64) -> f64 {
    let n = logp_new.len() as f64;
    logp_new
        .iter()
        .zip(logp_old)
        .zip(advantage)
        .map(|((&new, &old), &a)| clipped_surrogate(new, old, a, eps).0)
        .sum::<f64>()
        / n
}

/// `coef * mean (V - (A + V_then))^2`.
pub fn critic_loss(value_now: &[f64], advantage: &[f64], value_then: &[f64], coef: f64) -> f64 {
    let n = value_now.len() as f64;
    coef * value_now.iter().zip(advantage).zip(value_then).map(|((&v, &a), &old)| (v - (a + old)).powi(2)).sum::<f64>()
        / n
}

/// Derivative of the unscaled squared error wrt the current value.
pub fn critic_grad(value_now: f64, target: f64) -> f64 {
    2.0 * (value_now - target)
}
