use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};

/// Adaptive-moment optimizer state for one parameter collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: vec![0.0; num_params], v: vec![0.0; num_params] }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn num_params(&self) -> usize {
        self.m.len()
    }

    /// Descent step on a contiguous parameter vector.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        self.step_slices(&mut [params], grads)
    }

    /// Descent step on a parameter collection split over several slices;
    /// `grads` is their concatenation.
    pub fn step_slices(&mut self, params: &mut [&mut [f64]], grads: &[f64]) -> Result<()> {
        let total: usize = params.iter().map(|p| p.len()).sum();
        check_len("adam parameters", self.m.len(), total)?;
        check_len("adam gradients", self.m.len(), grads.len())?;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let mut i = 0;
        for slice in params.iter_mut() {
            for p in slice.iter_mut() {
                let g = grads[i];
                self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = self.m[i] / bc1;
                let v_hat = self.v[i] / bc2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                i += 1;
            }
        }
        Ok(())
    }
}

/// Rescales `grads` in place so its L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = AdamState::new(3, 1e-2);
        let mut p = vec![1.0, -2.0, 3.0];
        adam.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(adam.step_count(), 1);
        adam.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(adam.step_count(), 2);
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let lr = 1e-3;
        let mut adam = AdamState::new(2, lr);
        let mut p = vec![0.0, 0.0];
        let mut last = p.clone();
        for _ in 0..5000 {
            adam.step(&mut p, &[0.7, -3.0]).unwrap();
            let d0 = (p[0] - last[0]).abs();
            let d1 = (p[1] - last[1]).abs();
            assert!(d0 <= lr * 1.0001 && d1 <= lr * 1.0001);
            last = p.clone();
        }
        // iterate the exact moment recursions independently
        let (b1, b2): (f64, f64) = (0.9, 0.999);
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let g = 0.7;
        let mut step = 0.0;
        for t in 1..=5000 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            step = lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + 1e-8);
        }
        let mut probe = adam.clone();
        let before = p[0];
        probe.step(&mut p, &[0.7, -3.0]).unwrap();
        assert!(((before - p[0]) - lr).abs() < 1e-8);
        assert!((step - lr).abs() < 1e-8);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut adam = AdamState::new(3, 1e-3);
        let mut p = vec![0.0; 2];
        assert!(adam.step(&mut p, &[0.0; 2]).is_err());
        let mut p = vec![0.0; 3];
        assert!(adam.step(&mut p, &[0.0; 4]).is_err());
    }

    #[test]
    fn split_slices_match_contiguous() {
        let g = [0.1, -0.4, 2.0, 0.3];
        let mut a = AdamState::new(4, 1e-2);
        let mut b = a.clone();
        let mut flat = vec![1.0, 2.0, 3.0, 4.0];
        a.step(&mut flat, &g).unwrap();
        let (mut x, mut y) = (vec![1.0, 2.0], vec![3.0, 4.0]);
        b.step_slices(&mut [&mut x, &mut y], &g).unwrap();
        assert_eq!(flat, [x, y].concat());
    }

    #[test]
    fn grad_clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 0.5), 5.0);
        assert!((g[0] - 0.3).abs() < 1e-15 && (g[1] - 0.4).abs() < 1e-15);
        let mut g = vec![0.1, 0.1];
        clip_grad_norm(&mut g, 0.5);
        assert_eq!(g, vec![0.1, 0.1]);
    }
}
