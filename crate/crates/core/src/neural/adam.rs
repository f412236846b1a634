use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ActorCriticNet, Gradients};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one entry per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(net: &ActorCriticNet) -> Self {
        let n = net.params().len();
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One bias-corrected Adam descent step. If the update would produce a
/// non-finite parameter, neither the network nor the optimizer state changes.
pub fn adam_step(
    net: &mut ActorCriticNet,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    config: &AdamConfig,
) -> Result<()> {
    let n = net.params().len();
    if grads.0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: grads.0.len(),
        });
    }
    if state.m.len() != n || state.v.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: state.m.len(),
        });
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite { layer: "gradients" });
    }
    let step = state.step + 1;
    let bc1 = 1.0 - libm::pow(config.beta1, step as f64);
    let bc2 = 1.0 - libm::pow(config.beta2, step as f64);

    let mut m = state.m.clone();
    let mut v = state.v.clone();
    let mut params = net.params().to_vec();
    for i in 0..n {
        let g = grads.0[i];
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (libm::sqrt(v_hat) + config.eps);
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite { layer: "parameters" });
    }
    net.params_mut().copy_from_slice(&params);
    state.m = m;
    state.v = v;
    state.step = step;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::NetShape;

    fn tiny() -> ActorCriticNet {
        ActorCriticNet::zeros(NetShape::new(2, 2, true).with_hidden(&[2])).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = tiny();
        let before = net.clone();
        let mut state = AdamState::new(&net);
        let grads = Gradients::zeros_like(&net);
        adam_step(&mut net, &grads, &mut state, 1e-4, &AdamConfig::default()).unwrap();
        assert_eq!(net, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut net = tiny();
        let mut state = AdamState::new(&net);
        let mut grads = Gradients::zeros_like(&net);
        grads.0[0] = 1.0;
        let lr = 1e-4;
        adam_step(&mut net, &grads, &mut state, lr, &AdamConfig::default()).unwrap();
        // m_hat = 1, v_hat = 1  =>  delta = lr / (1 + eps)
        let expected = -lr / (1.0 + 1e-8);
        assert!((net.params()[0] - expected).abs() < 1e-18);
        assert_eq!(net.params()[1], 0.0);
    }

    #[test]
    fn moments_follow_recurrence() {
        let mut net = tiny();
        let mut state = AdamState::new(&net);
        let mut grads = Gradients::zeros_like(&net);
        grads.0[3] = 0.5;
        let cfg = AdamConfig::default();
        adam_step(&mut net, &grads, &mut state, 1e-3, &cfg).unwrap();
        adam_step(&mut net, &grads, &mut state, 1e-3, &cfg).unwrap();
        assert_eq!(state.step, 2);
        let m1 = 0.1 * 0.5;
        let m2 = 0.9 * m1 + 0.1 * 0.5;
        let v1 = 0.001 * 0.25;
        let v2 = 0.999 * v1 + 0.001 * 0.25;
        assert!((state.m[3] - m2).abs() < 1e-15);
        assert!((state.v[3] - v2).abs() < 1e-15);
        // constant gradient: both bias-corrected steps equal lr / (1 + eps / |g|)
        let step = 1e-3 * 0.5 / (0.5 + 1e-8);
        assert!((net.params()[3] + 2.0 * step).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_shapes_and_non_finite() {
        let mut net = tiny();
        let mut state = AdamState::new(&net);
        let short = Gradients(vec![0.0; 3]);
        assert!(adam_step(&mut net, &short, &mut state, 1e-3, &AdamConfig::default()).is_err());
        let mut nan = Gradients::zeros_like(&net);
        nan.0[0] = f64::NAN;
        let before = net.clone();
        assert!(adam_step(&mut net, &nan, &mut state, 1e-3, &AdamConfig::default()).is_err());
        assert_eq!(net, before);
        assert_eq!(state.step, 0);
    }
}
