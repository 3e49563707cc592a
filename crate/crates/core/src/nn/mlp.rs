use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected network with a linear output layer.
///
/// All weights and biases live in one flat vector. Layer `k` stores its
/// `out x in` weight matrix row-major, followed by its `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    #[serde(skip)]
    version: u64,
}

/// Everything `backward` needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `pre[k]` / `post[k]` are the pre- and post-activation of layer `k`;
    /// `post` additionally holds the network input at index 0.
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    version: u64,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    /// Zero-initialised network.
    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer sizes {sizes:?}")));
        }
        let count = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self { sizes: sizes.to_vec(), activation, params: vec![0.0; count], version: 0 })
    }

    /// Scaled-uniform init: weights `U(-sqrt(3/fan_in), sqrt(3/fan_in))` (unit
    /// variance gain), output layer additionally multiplied by `output_gain`,
    /// biases zero.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        activation: Activation,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, activation)?;
        let last = net.num_layers() - 1;
        for k in 0..net.num_layers() {
            let (fan_in, fan_out) = (net.sizes[k], net.sizes[k + 1]);
            let bound = (3.0 / fan_in as f64).sqrt() * if k == last { output_gain } else { 1.0 };
            let (w, _) = net.layer_offsets(k);
            for p in &mut net.params[w..w + fan_in * fan_out] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access bumps the version, invalidating outstanding caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    fn layer_offsets(&self, layer: usize) -> (usize, usize) {
        let mut off = 0;
        for w in self.sizes.windows(2).take(layer) {
            off += w[0] * w[1] + w[1];
        }
        let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
        (off, off + fan_in * fan_out)
    }

    pub fn weight(&self, layer: usize, out: usize, inp: usize) -> f64 {
        let (w, _) = self.layer_offsets(layer);
        self.params[w + out * self.sizes[layer] + inp]
    }

    pub fn bias(&self, layer: usize, out: usize) -> f64 {
        let (_, b) = self.layer_offsets(layer);
        self.params[b + out]
    }

    pub fn set_weight(&mut self, layer: usize, out: usize, inp: usize, v: f64) {
        let (w, _) = self.layer_offsets(layer);
        let idx = w + out * self.sizes[layer] + inp;
        self.params_mut()[idx] = v;
    }

    pub fn set_bias(&mut self, layer: usize, out: usize, v: f64) {
        let (_, b) = self.layer_offsets(layer);
        self.params_mut()[b + out] = v;
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        check_len("network input", self.input_size(), input.len())?;
        let layers = self.num_layers();
        let mut pre = Vec::with_capacity(layers);
        let mut post = Vec::with_capacity(layers + 1);
        post.push(input.to_vec());
        let mut off = 0;
        for k in 0..layers {
            let (fan_in, fan_out) = (self.sizes[k], self.sizes[k + 1]);
            let weights = &self.params[off..off + fan_in * fan_out];
            let biases = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            off += fan_in * fan_out + fan_out;
            let x = &post[k];
            let z: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &weights[o * fan_in..(o + 1) * fan_in];
                    row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + biases[o]
                })
                .collect();
            let act = if k + 1 == layers { Activation::Identity } else { self.activation };
            let y: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
            pre.push(z);
            post.push(y);
        }
        let out = post[layers].clone();
        Ok((out, ForwardCache { pre, post, version: self.version }))
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward(input).map(|(out, _)| out)
    }

    /// Gradient of `sum_i output_grad[i] * output[i]` wrt every parameter.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<Vec<f64>> {
        let mut grads = vec![0.0; self.num_params()];
        self.accumulate_backward(cache, output_grad, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Mlp::backward`] but adds into an existing gradient buffer.
    pub fn accumulate_backward(&self, cache: &ForwardCache, output_grad: &[f64], grads: &mut [f64]) -> Result<()> {
        if cache.version != self.version || cache.post.len() != self.sizes.len() {
            return Err(Error::Contract("forward cache does not match current parameters".into()));
        }
        check_len("output gradient", self.output_size(), output_grad.len())?;
        check_len("gradient buffer", self.num_params(), grads.len())?;

        let layers = self.num_layers();
        // delta = dL/dz for the current layer
        let mut delta: Vec<f64> = output_grad.to_vec();
        for k in (0..layers).rev() {
            let (fan_in, fan_out) = (self.sizes[k], self.sizes[k + 1]);
            let (w_off, b_off) = self.layer_offsets(k);
            let x = &cache.post[k];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grads[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                for (g, &v) in row.iter_mut().zip(x) {
                    *g += d * v;
                }
                grads[b_off + o] += d;
            }
            if k > 0 {
                let weights = &self.params[w_off..b_off];
                let mut prev = vec![0.0; fan_in];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (p, &w) in prev.iter_mut().zip(&weights[o * fan_in..(o + 1) * fan_in]) {
                        *p += d * w;
                    }
                }
                let (zs, ys) = (&cache.pre[k - 1], &cache.post[k]);
                for i in 0..fan_in {
                    prev[i] *= self.activation.derivative(zs[i], ys[i]);
                }
                delta = prev;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_output_biases() {
        let mut net = Mlp::zeros(&[3, 4, 2], Activation::Tanh).unwrap();
        net.set_bias(1, 0, 0.7);
        net.set_bias(1, 1, -1.5);
        assert_eq!(net.predict(&[1.0, 2.0, 3.0]).unwrap(), vec![0.7, -1.5]);
    }

    #[test]
    fn identity_network() {
        let mut net = Mlp::zeros(&[3, 3], Activation::Tanh).unwrap();
        for i in 0..3 {
            net.set_weight(0, i, i, 1.0);
        }
        assert_eq!(net.predict(&[0.5, -2.0, 9.0]).unwrap(), vec![0.5, -2.0, 9.0]);
    }

    #[test]
    fn linear_gradient_is_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::new(&[3, 1], Activation::Tanh, 1.0, &mut rng).unwrap();
        let x = [0.3, -1.2, 2.5];
        let (_, cache) = net.forward(&x).unwrap();
        let g = net.backward(&cache, &[1.0]).unwrap();
        assert_eq!(&g[..3], &x);
        assert_eq!(g[3], 1.0);
    }

    #[test]
    fn dimension_and_stale_cache_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::new(&[2, 4, 1], Activation::Tanh, 1.0, &mut rng).unwrap();
        assert!(net.forward(&[1.0]).is_err());
        let (_, cache) = net.forward(&[1.0, 2.0]).unwrap();
        net.params_mut()[0] += 1.0;
        assert!(matches!(net.backward(&cache, &[1.0]), Err(Error::Contract(_))));
        assert!(Mlp::zeros(&[3], Activation::Tanh).is_err());
    }

    #[test]
    fn gradients_finite_for_large_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::new(&[4, 16, 16, 3], Activation::Tanh, 1.0, &mut rng).unwrap();
        let x = [1e3, -1e3, 5e2, -7e2];
        let (_, cache) = net.forward(&x).unwrap();
        let g = net.backward(&cache, &[1.0, -1.0, 0.5]).unwrap();
        assert!(g.iter().all(|v| v.is_finite()));
    }
}
