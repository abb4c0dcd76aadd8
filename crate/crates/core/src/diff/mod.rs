//! Differentiable computation: a recording tape with second-order support,
//! dense layers, Gumbel-softmax, losses, the WGAN-GP penalty and Adam.

pub mod nn;
pub mod params;
pub mod tape;

pub use nn::{
    activate, dense, gradient_penalty, gumbel_noise, gumbel_softmax, gumbel_softmax_with_noise,
    interpolate, logistic_loss, loss, Activation, LossKind, LOG_EPS, NORM_EPS,
};
pub use params::{adam_step, clamp_params, AdamState, Bound, ParamSet};
pub use tape::{Tape, Var};
