//! Small fully connected actor-critic networks with hand-derived gradients.

mod adam;
mod dist;
mod net;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dist::{entropy, masked_log_softmax, sample_categorical, softmax, MaskedDistribution};
pub use net::{Activation, ActorCriticNet, Gradients, NetShape, Output, Trace, DEFAULT_HIDDEN};
