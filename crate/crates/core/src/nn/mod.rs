//! From-scratch function approximation: MLPs with analytic backprop, Adam,
//! and the two stochastic policy heads.

mod adam;
pub mod gradcheck;
mod heads;
mod mlp;

pub use adam::{clip_grad_norm, AdamState};
pub use heads::{
    sigmoid, BernoulliHead, BernoulliSample, GaussianHead, GaussianSample, BOUND_CLAMP, LOG_STD_MAX, LOG_STD_MIN,
};
pub use mlp::{Activation, ForwardCache, Mlp};
