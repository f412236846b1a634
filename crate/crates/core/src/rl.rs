//! Discounted returns, generalized advantage estimation, and the REINFORCE
//! and clipped PPO objectives with their exact gradients.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Move;
use crate::neural::{
    adam_step, masked_log_softmax, ActorCriticNet, AdamConfig, AdamState, Gradients, Trace,
};
use crate::policies::{type_input, Policy, StageMasks};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Reinforce,
    Ppo,
    PpoAr,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Reinforce => "reinforce",
            Algo::Ppo => "ppo",
            Algo::PpoAr => "ppo-ar",
        }
    }

    pub fn autoregressive(self) -> bool {
        self == Algo::PpoAr
    }
}

impl core::str::FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reinforce" => Ok(Algo::Reinforce),
            "ppo" => Ok(Algo::Ppo),
            "ppo-ar" => Ok(Algo::PpoAr),
            _ => Err(Error::UnknownAlgo),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub entropy_coef: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub value_coef: f64,
    pub ppo_epochs: usize,
    pub max_rounds: u32,
    pub pool_max: usize,
    pub pool_increment_iters: usize,
    pub pool_sample_p: f64,
    pub adam: AdamConfig,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.999,
            lr: 0.0001,
            batch_size: 2000,
            entropy_coef: 0.001,
            gae_lambda: 0.95,
            clip: 0.2,
            value_coef: 0.5,
            ppo_epochs: 4,
            max_rounds: crate::game::DEFAULT_MAX_ROUNDS,
            pool_max: 100_000,
            pool_increment_iters: 50,
            pool_sample_p: 0.5,
            adam: AdamConfig::default(),
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> core::result::Result<(), &'static str> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip > 0.0) {
            return Err("clip must be positive");
        }
        if !(self.lr > 0.0) {
            return Err("lr must be positive");
        }
        if self.batch_size == 0 || self.ppo_epochs == 0 || self.max_rounds == 0 {
            return Err("batch_size, ppo_epochs and max_rounds must be positive");
        }
        if self.pool_max == 0 || self.pool_increment_iters == 0 {
            return Err("pool_max and pool_increment_iters must be positive");
        }
        if !(0.0..=1.0).contains(&self.pool_sample_p) {
            return Err("pool_sample_p must lie in [0, 1]");
        }
        if self.entropy_coef < 0.0 || self.value_coef < 0.0 {
            return Err("loss coefficients must be non-negative");
        }
        Ok(())
    }
}

/// Trajectories of one agent, stored column-wise. Episodes are contiguous.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBatch {
    pub obs_dim: usize,
    pub mask_len: usize,
    pub slots: usize,
    pub observations: Vec<f64>,
    pub masks: Vec<bool>,
    pub moves: Vec<Move>,
    /// Behavior-policy log-probabilities; must have one entry per step.
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Episode cut off without reaching a terminal state.
    pub truncated: Vec<bool>,
    pub episode_ids: Vec<u32>,
}

impl RolloutBatch {
    pub fn new(obs_dim: usize, mask_len: usize, slots: usize) -> Self {
        Self {
            obs_dim,
            mask_len,
            slots,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        obs: &[f64],
        mask: &[bool],
        mv: Move,
        log_prob: f64,
        value: f64,
        reward: f64,
        done: bool,
        episode: u32,
    ) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        debug_assert_eq!(mask.len(), self.mask_len);
        self.observations.extend_from_slice(obs);
        self.masks.extend_from_slice(mask);
        self.moves.push(mv);
        self.log_probs.push(log_prob);
        self.values.push(value);
        self.rewards.push(reward);
        self.dones.push(done);
        self.truncated.push(false);
        self.episode_ids.push(episode);
    }

    pub fn obs(&self, i: usize) -> &[f64] {
        &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn mask(&self, i: usize) -> &[bool] {
        &self.masks[i * self.mask_len..(i + 1) * self.mask_len]
    }

    /// Contiguous episode ranges, split after every done or truncated step.
    /// A trailing open episode is returned as well.
    pub fn episode_ranges(&self) -> Vec<Range<usize>> {
        let mut ranges = Vec::new();
        let mut start = 0;
        for i in 0..self.len() {
            let boundary = self.dones[i]
                || self.truncated[i]
                || (i + 1 < self.len() && self.episode_ids[i + 1] != self.episode_ids[i]);
            if boundary {
                ranges.push(start..i + 1);
                start = i + 1;
            }
        }
        if start < self.len() {
            ranges.push(start..self.len());
        }
        ranges
    }

    fn episode_is_complete(&self, r: &Range<usize>) -> bool {
        self.dones[r.end - 1]
    }

    fn check(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        if self.log_probs.len() != n {
            return Err(Error::MissingLogProbs);
        }
        if self.observations.len() != n * self.obs_dim
            || self.masks.len() != n * self.mask_len
            || self.rewards.len() != n
            || self.values.len() != n
            || self.dones.len() != n
            || self.truncated.len() != n
        {
            return Err(Error::Shape("rollout batch columns have inconsistent lengths"));
        }
        Ok(())
    }
}

/// `G_t = r_t + gamma * G_{t+1}` over one episode.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut running = 0.0;
    for t in (0..rewards.len()).rev() {
        running = rewards[t] + gamma * running;
        out[t] = running;
    }
    out
}

/// `delta_t = r_t + gamma V_{t+1} - V_t`, `A_t = delta_t + gamma lambda A_{t+1}`,
/// with `V_T = bootstrap_value`.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    if rewards.len() != values.len() {
        return Err(Error::Dimension {
            expected: rewards.len(),
            got: values.len(),
        });
    }
    let mut adv = vec![0.0; rewards.len()];
    let mut next_value = bootstrap_value;
    let mut running = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
        next_value = values[t];
    }
    Ok(adv)
}

/// Shifts to zero mean and scales to unit (population) variance. Batches
/// with fewer than two entries or no spread are only centered.
pub fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len();
    if n == 0 {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n as f64;
    for a in adv.iter_mut() {
        *a -= mean;
    }
    if n < 2 {
        return;
    }
    let var = adv.iter().map(|a| a * a).sum::<f64>() / n as f64;
    let std = libm::sqrt(var);
    if std > 1e-8 {
        for a in adv.iter_mut() {
            *a /= std;
        }
    }
}

/// Per-episode discounted returns over a batch of complete episodes.
pub fn batch_returns(batch: &RolloutBatch, gamma: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(batch.len());
    for r in batch.episode_ranges() {
        if !batch.episode_is_complete(&r) {
            return Err(Error::TruncatedEpisode);
        }
        out.extend(discounted_returns(&batch.rewards[r], gamma));
    }
    Ok(out)
}

/// Raw GAE advantages per episode. Complete episodes bootstrap from 0;
/// truncated ones from the last stored value.
pub fn batch_advantages(batch: &RolloutBatch, gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(batch.len());
    for r in batch.episode_ranges() {
        let bootstrap = if batch.episode_is_complete(&r) {
            0.0
        } else {
            batch.values[r.end - 1]
        };
        out.extend(gae_advantages(
            &batch.rewards[r.clone()],
            &batch.values[r],
            bootstrap,
            gamma,
            lambda,
        )?);
    }
    Ok(out)
}

/// Objective to minimize, with its per-sample data.
#[derive(Debug, Clone, Copy)]
pub enum LossSpec<'a> {
    /// `-mean(log pi(a|o) * G)`
    Reinforce { returns: &'a [f64] },
    /// Clipped surrogate plus value regression minus an entropy bonus.
    Ppo {
        advantages: &'a [f64],
        value_targets: &'a [f64],
        old_log_probs: &'a [f64],
        clip: f64,
        entropy_coef: f64,
        value_coef: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossValue {
    pub total: f64,
    pub policy: f64,
    /// Mean squared value error (before the coefficient).
    pub value: f64,
    /// Mean policy entropy; for the autoregressive policy the sum of the two stage entropies.
    pub entropy: f64,
}

/// Gradients for every network of a policy: `[net]` for flat policies,
/// `[node_net, type_net]` for autoregressive ones.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrads(pub Vec<Gradients>);

impl PolicyGrads {
    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.0.iter().flat_map(|g| g.0.iter()).map(|g| g * g).sum())
    }
}

struct Terms {
    policy: f64,
    value: f64,
    d_logp: f64,
    d_entropy: f64,
    d_value: f64,
}

impl LossSpec<'_> {
    fn check(&self, n: usize) -> Result<()> {
        let lens: &[usize] = match self {
            LossSpec::Reinforce { returns } => &[returns.len()],
            LossSpec::Ppo {
                advantages,
                value_targets,
                old_log_probs,
                ..
            } => {
                if old_log_probs.len() != n {
                    return Err(Error::MissingLogProbs);
                }
                &[advantages.len(), value_targets.len()]
            }
        };
        for &len in lens {
            if len != n {
                return Err(Error::Dimension { expected: n, got: len });
            }
        }
        Ok(())
    }

    fn terms(&self, i: usize, logp: f64, value: f64) -> Terms {
        match *self {
            LossSpec::Reinforce { returns } => Terms {
                policy: -logp * returns[i],
                value: 0.0,
                d_logp: -returns[i],
                d_entropy: 0.0,
                d_value: 0.0,
            },
            LossSpec::Ppo {
                advantages,
                value_targets,
                old_log_probs,
                clip,
                entropy_coef,
                value_coef,
            } => {
                let adv = advantages[i];
                let ratio = libm::exp(logp - old_log_probs[i]);
                let unclipped = ratio * adv;
                let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
                let (objective, d_objective) = if unclipped <= clipped {
                    (unclipped, ratio * adv)
                } else {
                    (clipped, 0.0)
                };
                let err = value - value_targets[i];
                Terms {
                    policy: -objective,
                    value: err * err,
                    d_logp: -d_objective,
                    d_entropy: -entropy_coef,
                    d_value: 2.0 * value_coef * err,
                }
            }
        }
    }

    fn combine(&self, policy: f64, value: f64, entropy: f64) -> f64 {
        match *self {
            LossSpec::Reinforce { .. } => policy,
            LossSpec::Ppo {
                entropy_coef,
                value_coef,
                ..
            } => policy + value_coef * value - entropy_coef * entropy,
        }
    }
}

/// Mean-reduced loss over the batch.
pub fn loss_value(policy: &Policy, batch: &RolloutBatch, spec: &LossSpec<'_>) -> Result<LossValue> {
    evaluate(policy, batch, spec, None)
}

/// Mean-reduced loss and its exact gradient with respect to every parameter.
pub fn loss_gradients(
    policy: &Policy,
    batch: &RolloutBatch,
    spec: &LossSpec<'_>,
) -> Result<(LossValue, PolicyGrads)> {
    let mut grads = match policy {
        Policy::Flat { net } => PolicyGrads(vec![Gradients::zeros_like(net)]),
        Policy::Autoregressive { nets } => PolicyGrads(vec![
            Gradients::zeros_like(&nets.node_net),
            Gradients::zeros_like(&nets.type_net),
        ]),
        _ => return Err(Error::PolicyMismatch),
    };
    let loss = evaluate(policy, batch, spec, Some(&mut grads))?;
    Ok((loss, grads))
}

fn evaluate(
    policy: &Policy,
    batch: &RolloutBatch,
    spec: &LossSpec<'_>,
    mut grads: Option<&mut PolicyGrads>,
) -> Result<LossValue> {
    batch.check()?;
    let n = batch.len();
    spec.check(n)?;
    let inv = 1.0 / n as f64;
    let mut sums = LossValue::default();
    let mut trace = Trace::default();
    let mut type_trace = Trace::default();

    for i in 0..n {
        let obs = batch.obs(i);
        let mask = batch.mask(i);
        let mv = batch.moves[i];
        match policy {
            Policy::Flat { net } => {
                net.forward_traced(obs, &mut trace)?;
                let dist = masked_log_softmax(&trace.logits, mask)?;
                let action = mv.node * batch.slots + mv.slot;
                let logp = dist.log_probs[action];
                if !mask[action] {
                    return Err(Error::NoLegalAction);
                }
                let entropy = dist.entropy();
                let t = spec.terms(i, logp, trace.value);
                sums.policy += t.policy;
                sums.value += t.value;
                sums.entropy += entropy;
                if let Some(g) = grads.as_deref_mut() {
                    let mut dlogits = vec![0.0; trace.logits.len()];
                    dist.logit_gradient(action, t.d_logp * inv, t.d_entropy * inv, mask, &mut dlogits);
                    net.backward(&trace, &dlogits, t.d_value * inv, &mut g.0[0]);
                }
            }
            Policy::Autoregressive { nets } => {
                let masks = StageMasks::from_flat(mask, batch.slots);
                nets.node_net.forward_traced(obs, &mut trace)?;
                let node_dist = masked_log_softmax(&trace.logits, &masks.node)?;
                let input = type_input(obs, mv.node, nets.node_count());
                nets.type_net.forward_traced(&input, &mut type_trace)?;
                let type_mask = masks.types_for(mv.node);
                let type_dist = masked_log_softmax(&type_trace.logits, type_mask)?;
                if !type_mask[mv.slot] {
                    return Err(Error::NoLegalAction);
                }
                let logp = node_dist.log_probs[mv.node] + type_dist.log_probs[mv.slot];
                let entropy = node_dist.entropy() + type_dist.entropy();
                let t = spec.terms(i, logp, trace.value);
                sums.policy += t.policy;
                sums.value += t.value;
                sums.entropy += entropy;
                if let Some(g) = grads.as_deref_mut() {
                    let (node_g, type_g) = g.0.split_at_mut(1);
                    let mut dnode = vec![0.0; trace.logits.len()];
                    node_dist.logit_gradient(
                        mv.node,
                        t.d_logp * inv,
                        t.d_entropy * inv,
                        &masks.node,
                        &mut dnode,
                    );
                    nets.node_net
                        .backward(&trace, &dnode, t.d_value * inv, &mut node_g[0]);
                    let mut dtype = vec![0.0; type_trace.logits.len()];
                    type_dist.logit_gradient(
                        mv.slot,
                        t.d_logp * inv,
                        t.d_entropy * inv,
                        type_mask,
                        &mut dtype,
                    );
                    nets.type_net.backward(&type_trace, &dtype, 0.0, &mut type_g[0]);
                }
            }
            _ => return Err(Error::PolicyMismatch),
        }
    }

    let policy_loss = sums.policy * inv;
    let value_loss = sums.value * inv;
    let entropy = sums.entropy * inv;
    let total = spec.combine(policy_loss, value_loss, entropy);
    if !total.is_finite() {
        return Err(Error::NonFinite { layer: "loss" });
    }
    Ok(LossValue {
        total,
        policy: policy_loss,
        value: value_loss,
        entropy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// L2 norm over all networks of the first-pass gradient.
    pub grad_norm: f64,
    pub epochs: usize,
}

/// Optimizer state matching a learning policy's networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer(pub Vec<AdamState>);

impl Optimizer {
    pub fn for_policy(policy: &Policy) -> Result<Self> {
        match policy {
            Policy::Flat { net } => Ok(Self(vec![AdamState::new(net)])),
            Policy::Autoregressive { nets } => Ok(Self(vec![
                AdamState::new(&nets.node_net),
                AdamState::new(&nets.type_net),
            ])),
            _ => Err(Error::PolicyMismatch),
        }
    }
}

fn networks_mut(policy: &mut Policy) -> Result<Vec<&mut ActorCriticNet>> {
    match policy {
        Policy::Flat { net } => Ok(vec![net]),
        Policy::Autoregressive { nets } => Ok(vec![&mut nets.node_net, &mut nets.type_net]),
        _ => Err(Error::PolicyMismatch),
    }
}

fn apply(
    policy: &mut Policy,
    grads: &PolicyGrads,
    optimizer: &mut Optimizer,
    hp: &Hyperparams,
) -> Result<()> {
    for ((net, g), state) in networks_mut(policy)?
        .into_iter()
        .zip(&grads.0)
        .zip(optimizer.0.iter_mut())
    {
        adam_step(net, g, state, hp.lr, &hp.adam)?;
    }
    Ok(())
}

/// Updates `policy` from `batch`: one gradient step for REINFORCE,
/// `hp.ppo_epochs` full-batch passes for PPO and PPO-AR. On failure the
/// policy and optimizer are restored to their state before the call.
pub fn update_policy(
    policy: &mut Policy,
    optimizer: &mut Optimizer,
    batch: &RolloutBatch,
    hp: &Hyperparams,
    algo: Algo,
) -> Result<UpdateReport> {
    let kind_ok = match algo {
        Algo::Reinforce | Algo::Ppo => matches!(policy, Policy::Flat { .. }),
        Algo::PpoAr => matches!(policy, Policy::Autoregressive { .. }),
    };
    if !kind_ok {
        return Err(Error::PolicyMismatch);
    }
    let saved_policy = policy.clone();
    let saved_optimizer = optimizer.clone();
    let result = update_inner(policy, optimizer, batch, hp, algo);
    if result.is_err() {
        *policy = saved_policy;
        *optimizer = saved_optimizer;
    }
    result
}

fn update_inner(
    policy: &mut Policy,
    optimizer: &mut Optimizer,
    batch: &RolloutBatch,
    hp: &Hyperparams,
    algo: Algo,
) -> Result<UpdateReport> {
    batch.check()?;
    match algo {
        Algo::Reinforce => {
            let returns = batch_returns(batch, hp.gamma)?;
            let spec = LossSpec::Reinforce { returns: &returns };
            let (loss, grads) = loss_gradients(policy, batch, &spec)?;
            apply(policy, &grads, optimizer, hp)?;
            Ok(UpdateReport {
                policy_loss: loss.policy,
                value_loss: 0.0,
                entropy: loss.entropy,
                grad_norm: grads.l2_norm(),
                epochs: 1,
            })
        }
        Algo::Ppo | Algo::PpoAr => {
            let raw = batch_advantages(batch, hp.gamma, hp.gae_lambda)?;
            let targets: Vec<f64> = raw.iter().zip(&batch.values).map(|(a, v)| a + v).collect();
            let mut advantages = raw;
            normalize_advantages(&mut advantages);
            let spec = LossSpec::Ppo {
                advantages: &advantages,
                value_targets: &targets,
                old_log_probs: &batch.log_probs,
                clip: hp.clip,
                entropy_coef: hp.entropy_coef,
                value_coef: hp.value_coef,
            };
            let mut report = None;
            for _ in 0..hp.ppo_epochs {
                let (loss, grads) = loss_gradients(policy, batch, &spec)?;
                report.get_or_insert(UpdateReport {
                    policy_loss: loss.policy,
                    value_loss: loss.value,
                    entropy: loss.entropy,
                    grad_norm: grads.l2_norm(),
                    epochs: hp.ppo_epochs,
                });
                apply(policy, &grads, optimizer, hp)?;
            }
            report.ok_or(Error::Empty)
        }
    }
}
