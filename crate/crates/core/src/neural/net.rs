use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: [usize; 2] = [128, 128];

const HIDDEN_GAIN: f64 = core::f64::consts::SQRT_2;
const POLICY_GAIN: f64 = 0.01;
const VALUE_GAIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `x * sigmoid(x)`
    Silu,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Silu => x / (1.0 + libm::exp(-x)),
        }
    }

    #[inline]
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + libm::exp(-x));
                s * (1.0 + x * (1.0 - s))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub action_count: usize,
    pub value_head: bool,
}

impl NetShape {
    pub fn new(input_dim: usize, action_count: usize, value_head: bool) -> Self {
        Self {
            input_dim,
            hidden: DEFAULT_HIDDEN.to_vec(),
            action_count,
            value_head,
        }
    }

    pub fn with_hidden(mut self, hidden: &[usize]) -> Self {
        self.hidden = hidden.to_vec();
        self
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.action_count == 0 {
            return Err(Error::Shape("input and action dimensions must be positive"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Shape("at least one non-empty hidden layer is required"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every dense layer: hidden layers, policy head, value head.
    fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        let mut fan_in = self.input_dim;
        for &h in &self.hidden {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims.push((fan_in, self.action_count));
        if self.value_head {
            dims.push((fan_in, 1));
        }
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|&(i, o)| i * o + o).sum()
    }
}

/// Offsets of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dense {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    bias: usize,
}

impl Dense {
    fn end(&self) -> usize {
        self.bias + self.fan_out
    }
}

fn layout(shape: &NetShape) -> Vec<Dense> {
    let mut offset = 0;
    shape
        .layers()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let d = Dense {
                fan_in,
                fan_out,
                weights: offset,
                bias: offset + fan_in * fan_out,
            };
            offset = d.end();
            d
        })
        .collect()
}

/// Shared trunk of dense layers, a policy head producing action logits and an
/// optional scalar value head. All parameters live in one flat vector:
/// per layer, row-major `[fan_out][fan_in]` weights followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetRepr", into = "NetRepr")]
pub struct ActorCriticNet {
    shape: NetShape,
    activation: Activation,
    params: Vec<f64>,
    layers: Vec<Dense>,
}

#[derive(Serialize, Deserialize)]
struct NetRepr {
    shape: NetShape,
    activation: Activation,
    params: Vec<f64>,
}

impl TryFrom<NetRepr> for ActorCriticNet {
    type Error = Error;

    fn try_from(repr: NetRepr) -> Result<Self> {
        ActorCriticNet::from_params(repr.shape, repr.activation, repr.params)
    }
}

impl From<ActorCriticNet> for NetRepr {
    fn from(net: ActorCriticNet) -> Self {
        Self {
            shape: net.shape,
            activation: net.activation,
            params: net.params,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub logits: Vec<f64>,
    /// Zero when the network has no value head.
    pub value: f64,
}

/// Activations retained from a forward pass for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub value: f64,
}

/// Flat gradient vector with the parameter layout of its network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn zeros_like(net: &ActorCriticNet) -> Self {
        Self(vec![0.0; net.params.len()])
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|g| g * g).sum())
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.0 {
            *g *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

impl ActorCriticNet {
    pub fn new<R: Rng + ?Sized>(shape: NetShape, rng: &mut R) -> Result<Self> {
        shape.validate()?;
        let layers = layout(&shape);
        let mut params = vec![0.0; shape.param_count()];
        let heads = shape.hidden.len();
        for (idx, d) in layers.iter().enumerate() {
            let gain = match idx {
                i if i < heads => HIDDEN_GAIN,
                i if i == heads => POLICY_GAIN,
                _ => VALUE_GAIN,
            };
            let bound = gain * libm::sqrt(3.0 / d.fan_in as f64);
            for w in &mut params[d.weights..d.bias] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(Self {
            shape,
            activation: Activation::Silu,
            params,
            layers,
        })
    }

    pub fn zeros(shape: NetShape) -> Result<Self> {
        shape.validate()?;
        let params = vec![0.0; shape.param_count()];
        Self::from_params(shape, Activation::Silu, params)
    }

    pub fn from_params(shape: NetShape, activation: Activation, params: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if params.len() != shape.param_count() {
            return Err(Error::Dimension {
                expected: shape.param_count(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite { layer: "parameters" });
        }
        let layers = layout(&shape);
        Ok(Self {
            shape,
            activation,
            params,
            layers,
        })
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.shape.input_dim
    }

    pub fn action_count(&self) -> usize {
        self.shape.action_count
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, obs: &[f64]) -> Result<Output> {
        let mut trace = Trace::default();
        self.forward_traced(obs, &mut trace)?;
        Ok(Output {
            logits: trace.logits,
            value: trace.value,
        })
    }

    /// Forward pass that keeps the intermediate activations in `trace`.
    /// Buffers inside `trace` are reused across calls.
    pub fn forward_traced(&self, obs: &[f64], trace: &mut Trace) -> Result<()> {
        if obs.len() != self.shape.input_dim {
            return Err(Error::Dimension {
                expected: self.shape.input_dim,
                got: obs.len(),
            });
        }
        let hidden = self.shape.hidden.len();
        trace.input.clear();
        trace.input.extend_from_slice(obs);
        trace.pre.resize_with(hidden, Vec::new);
        trace.post.resize_with(hidden, Vec::new);

        for (i, d) in self.layers[..hidden].iter().enumerate() {
            let (done, rest) = trace.post.split_at_mut(i);
            let x: &[f64] = if i == 0 { &trace.input } else { &done[i - 1] };
            let pre = &mut trace.pre[i];
            pre.resize(d.fan_out, 0.0);
            self.affine(d, x, pre);
            let post = &mut rest[0];
            post.clear();
            post.extend(pre.iter().map(|&z| self.activation.apply(z)));
            if post.iter().any(|v| !v.is_finite()) {
                const NAMES: [&str; 4] = ["shared.0", "shared.1", "shared.2", "shared.3"];
                return Err(Error::NonFinite {
                    layer: NAMES.get(i).copied().unwrap_or("shared"),
                });
            }
        }

        let features = &trace.post[hidden - 1];
        let policy = &self.layers[hidden];
        trace.logits.resize(policy.fan_out, 0.0);
        self.affine(policy, features, &mut trace.logits);
        if trace.logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                layer: "policy_head",
            });
        }
        trace.value = 0.0;
        if self.shape.value_head {
            let mut v = [0.0];
            self.affine(&self.layers[hidden + 1], features, &mut v);
            if !v[0].is_finite() {
                return Err(Error::NonFinite { layer: "value_head" });
            }
            trace.value = v[0];
        }
        Ok(())
    }

    /// Accumulates parameter gradients given `d loss / d logits` and
    /// `d loss / d value` for the sample recorded in `trace`.
    pub fn backward(&self, trace: &Trace, dlogits: &[f64], dvalue: f64, grads: &mut Gradients) {
        let hidden = self.shape.hidden.len();
        let features = &trace.post[hidden - 1];
        let mut dfeat = vec![0.0; features.len()];

        let policy = &self.layers[hidden];
        self.affine_backward(policy, features, dlogits, &mut grads.0, Some(&mut dfeat));
        if self.shape.value_head && dvalue != 0.0 {
            let value = &self.layers[hidden + 1];
            self.affine_backward(value, features, &[dvalue], &mut grads.0, Some(&mut dfeat));
        }

        let mut dy = dfeat;
        for i in (0..hidden).rev() {
            for (g, &z) in dy.iter_mut().zip(&trace.pre[i]) {
                *g *= self.activation.derivative(z);
            }
            let d = &self.layers[i];
            if i == 0 {
                self.affine_backward(d, &trace.input, &dy, &mut grads.0, None);
            } else {
                let mut dx = vec![0.0; d.fan_in];
                self.affine_backward(d, &trace.post[i - 1], &dy, &mut grads.0, Some(&mut dx));
                dy = dx;
            }
        }
    }

    fn affine(&self, d: &Dense, x: &[f64], y: &mut [f64]) {
        let w = &self.params[d.weights..d.bias];
        let b = &self.params[d.bias..d.end()];
        for ((out, row), &bias) in y.iter_mut().zip(w.chunks_exact(d.fan_in)).zip(b) {
            *out = bias + dot(row, x);
        }
    }

    fn affine_backward(
        &self,
        d: &Dense,
        x: &[f64],
        dy: &[f64],
        grads: &mut [f64],
        dx: Option<&mut [f64]>,
    ) {
        let (gw, gb) = grads[d.weights..d.end()].split_at_mut(d.fan_in * d.fan_out);
        for ((row, gb), &g) in gw.chunks_exact_mut(d.fan_in).zip(gb.iter_mut()).zip(dy) {
            if g != 0.0 {
                axpy(g, x, row);
            }
            *gb += g;
        }
        if let Some(dx) = dx {
            let w = &self.params[d.weights..d.bias];
            for (row, &g) in w.chunks_exact(d.fan_in).zip(dy) {
                if g != 0.0 {
                    axpy(g, row, dx);
                }
            }
        }
    }
}

/// Dot product with eight independent accumulators so the loop vectorizes
/// while keeping a fixed summation order.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
