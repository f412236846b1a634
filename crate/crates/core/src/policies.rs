//! Static heuristic opponents, the flat neural policy and the two-stage
//! autoregressive policy that first picks a node and then an attribute.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    observation_len, AttackerAction, DefenderAction, GameConstants, GameState, Move, NodeId, Role,
    RoleAction,
};
use crate::neural::{masked_log_softmax, ActorCriticNet, MaskedDistribution, NetShape};

/// An action together with its log-probability under the acting policy and
/// the critic's estimate (0 for policies without a critic).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction<A> {
    pub action: A,
    pub log_prob: f64,
    pub value: f64,
}

pub type SampledMove = SampledAction<Move>;

impl SampledMove {
    pub fn typed<A: RoleAction>(self, m: usize) -> SampledAction<A> {
        SampledAction {
            action: A::from_move(self.action, m),
            log_prob: self.log_prob,
            value: self.value,
        }
    }
}

/// Flat index `node * (m + 1) + slot`; recon and monitor use slot `m`.
pub fn encode_action<A: RoleAction>(action: A, constants: &GameConstants) -> usize {
    let mv = action.to_move(constants.m);
    mv.node * constants.slots() + mv.slot
}

pub fn decode_action<A: RoleAction>(
    index: usize,
    node_count: usize,
    constants: &GameConstants,
) -> Result<A> {
    let slots = constants.slots();
    if index >= node_count * slots {
        return Err(Error::Dimension {
            expected: node_count * slots,
            got: index,
        });
    }
    Ok(A::from_move(
        Move {
            node: index / slots,
            slot: index % slots,
        },
        constants.m,
    ))
}

fn pick_uniform<T: Copy, R: Rng + ?Sized>(candidates: &[T], rng: &mut R) -> (T, f64) {
    let k = candidates.len();
    let choice = if k == 1 { 0 } else { rng.random_range(0..k) };
    (candidates[choice], -libm::log(k as f64))
}

/// Increments a uniformly chosen attribute among those holding the global
/// minimum defense value over all defender-owned nodes, detection included.
pub fn defend_minimal<R: Rng + ?Sized>(
    state: &GameState,
    rng: &mut R,
) -> SampledAction<DefenderAction> {
    let m = state.constants.m;
    let start = state.topology.start_id();
    let mut best = u32::MAX;
    let mut ties: Vec<Move> = Vec::new();
    for (node, row) in state.defense.iter().enumerate() {
        if node == start {
            continue;
        }
        for (slot, &v) in row.iter().enumerate() {
            if v < best {
                best = v;
                ties.clear();
            }
            if v == best {
                ties.push(Move { node, slot });
            }
        }
    }
    let (mv, log_prob) = pick_uniform(&ties, rng);
    SampledAction {
        action: DefenderAction::from_move(mv, m),
        log_prob,
        value: 0.0,
    }
}

/// Attacks a uniformly chosen attribute among those holding the global
/// maximum attack value over visible, not yet compromised nodes. Never recons.
pub fn attack_maximal<R: Rng + ?Sized>(
    state: &GameState,
    rng: &mut R,
) -> Result<SampledAction<AttackerAction>> {
    let mut best = 0;
    let mut ties: Vec<Move> = Vec::new();
    for node in state.visible_nodes() {
        if state.is_compromised(node) {
            continue;
        }
        for (slot, &v) in state.attack[node].iter().enumerate() {
            if ties.is_empty() || v > best {
                best = v;
                ties.clear();
            }
            if v == best {
                ties.push(Move { node, slot });
            }
        }
    }
    if ties.is_empty() || state.status.is_terminal() {
        return Err(Error::NoLegalAction);
    }
    let (mv, log_prob) = pick_uniform(&ties, rng);
    Ok(SampledAction {
        action: AttackerAction::from_move(mv, state.constants.m),
        log_prob,
        value: 0.0,
    })
}

fn uniform_over_mask<R: Rng + ?Sized>(mask: &[bool], slots: usize, rng: &mut R) -> Result<SampledMove> {
    let legal: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if legal.is_empty() {
        return Err(Error::NoLegalAction);
    }
    let (idx, log_prob) = pick_uniform(&legal, rng);
    Ok(SampledAction {
        action: Move {
            node: idx / slots,
            slot: idx % slots,
        },
        log_prob,
        value: 0.0,
    })
}

/// Samples from the masked softmax of a single network over all
/// `|N| * (m + 1)` actions.
pub fn act_flat<R: Rng + ?Sized>(
    net: &ActorCriticNet,
    obs: &[f64],
    legal_mask: &[bool],
    slots: usize,
    rng: &mut R,
) -> Result<SampledMove> {
    let out = net.forward(obs)?;
    let dist = masked_log_softmax(&out.logits, legal_mask)?;
    let idx = dist.sample(rng)?;
    Ok(SampledAction {
        action: Move {
            node: idx / slots,
            slot: idx % slots,
        },
        log_prob: dist.log_probs[idx],
        value: out.value,
    })
}

/// Node-level and per-node type-level legality derived from a flat mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageMasks {
    pub node: Vec<bool>,
    /// Flat `[node][slots]`.
    pub types: Vec<bool>,
    pub slots: usize,
}

impl StageMasks {
    pub fn from_flat(mask: &[bool], slots: usize) -> Self {
        let node = mask.chunks_exact(slots).map(|row| row.iter().any(|&b| b)).collect();
        Self {
            node,
            types: mask.to_vec(),
            slots,
        }
    }

    pub fn types_for(&self, node: NodeId) -> &[bool] {
        &self.types[node * self.slots..(node + 1) * self.slots]
    }

    fn check(&self) -> Result<()> {
        if self.types.len() != self.node.len() * self.slots {
            return Err(Error::Dimension {
                expected: self.node.len() * self.slots,
                got: self.types.len(),
            });
        }
        if !self.node.iter().any(|&b| b) {
            return Err(Error::NoLegalAction);
        }
        for (n, &legal) in self.node.iter().enumerate() {
            if legal && !self.types_for(n).iter().any(|&b| b) {
                return Err(Error::NoLegalAction);
            }
        }
        Ok(())
    }
}

/// Node-selection network (carries the critic) and type-selection network
/// conditioned on a one-hot encoding of the chosen node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoregressiveNets {
    pub node_net: ActorCriticNet,
    pub type_net: ActorCriticNet,
}

impl AutoregressiveNets {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        node_count: usize,
        slots: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let node_net =
            ActorCriticNet::new(NetShape::new(obs_dim, node_count, true).with_hidden(hidden), rng)?;
        let type_net = ActorCriticNet::new(
            NetShape::new(obs_dim + node_count, slots, false).with_hidden(hidden),
            rng,
        )?;
        Ok(Self { node_net, type_net })
    }

    pub fn node_count(&self) -> usize {
        self.node_net.action_count()
    }

    pub fn slots(&self) -> usize {
        self.type_net.action_count()
    }

    /// Node distribution and critic value.
    pub fn node_stage(&self, obs: &[f64], masks: &StageMasks) -> Result<(MaskedDistribution, f64)> {
        let out = self.node_net.forward(obs)?;
        Ok((masked_log_softmax(&out.logits, &masks.node)?, out.value))
    }

    pub fn type_stage(&self, obs: &[f64], node: NodeId, masks: &StageMasks) -> Result<MaskedDistribution> {
        let input = type_input(obs, node, self.node_count());
        let out = self.type_net.forward(&input)?;
        masked_log_softmax(&out.logits, masks.types_for(node))
    }
}

/// `obs` followed by a one-hot encoding of `node`.
pub fn type_input(obs: &[f64], node: NodeId, node_count: usize) -> Vec<f64> {
    let mut input = Vec::with_capacity(obs.len() + node_count);
    input.extend_from_slice(obs);
    input.extend((0..node_count).map(|k| if k == node { 1.0 } else { 0.0 }));
    input
}

/// Samples the node, then the attribute given the node. The returned
/// log-probability is the sum of both stage log-probabilities.
pub fn act_autoregressive<R: Rng + ?Sized>(
    nets: &AutoregressiveNets,
    obs: &[f64],
    masks: &StageMasks,
    rng: &mut R,
) -> Result<SampledMove> {
    masks.check()?;
    let (node_dist, value) = nets.node_stage(obs, masks)?;
    let node = node_dist.sample(rng)?;
    let type_dist = nets.type_stage(obs, node, masks)?;
    let slot = type_dist.sample(rng)?;
    Ok(SampledAction {
        action: Move { node, slot },
        log_prob: node_dist.log_probs[node] + type_dist.log_probs[slot],
        value,
    })
}

/// Any agent that can pick a move in a game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Policy {
    DefendMinimal,
    AttackMaximal,
    /// Uniform over legal actions.
    Random,
    /// Attacker that only performs reconnaissance.
    ReconOnly,
    Flat { net: ActorCriticNet },
    Autoregressive { nets: AutoregressiveNets },
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::DefendMinimal => "defend-minimal",
            Policy::AttackMaximal => "attack-maximal",
            Policy::Random => "random",
            Policy::ReconOnly => "recon-only",
            Policy::Flat { .. } => "flat",
            Policy::Autoregressive { .. } => "autoregressive",
        }
    }

    pub fn from_heuristic_name(name: &str) -> Option<Self> {
        match name {
            "defend-minimal" => Some(Policy::DefendMinimal),
            "attack-maximal" => Some(Policy::AttackMaximal),
            "random" => Some(Policy::Random),
            "recon-only" => Some(Policy::ReconOnly),
            _ => None,
        }
    }

    pub fn is_neural(&self) -> bool {
        matches!(self, Policy::Flat { .. } | Policy::Autoregressive { .. })
    }

    /// Whether the policy can play `role`.
    pub fn supports(&self, role: Role) -> bool {
        match self {
            Policy::DefendMinimal => role == Role::Defender,
            Policy::AttackMaximal | Policy::ReconOnly => role == Role::Attacker,
            _ => true,
        }
    }

    pub fn act<R: Rng + ?Sized>(&self, state: &GameState, role: Role, rng: &mut R) -> Result<SampledMove> {
        let obs = if self.is_neural() {
            state.observation(role)
        } else {
            Vec::new()
        };
        let mask = state.legal_mask(role);
        self.act_observed(state, role, &obs, &mask, rng)
    }

    /// Like [`Policy::act`] with the observation and legality mask already
    /// computed. Heuristics ignore `obs`.
    pub fn act_observed<R: Rng + ?Sized>(
        &self,
        state: &GameState,
        role: Role,
        obs: &[f64],
        mask: &[bool],
        rng: &mut R,
    ) -> Result<SampledMove> {
        if !self.supports(role) {
            return Err(Error::WrongRole(role));
        }
        if state.status.is_terminal() {
            return Err(Error::GameOver);
        }
        let m = state.constants.m;
        let slots = state.constants.slots();
        match self {
            Policy::DefendMinimal => {
                let s = defend_minimal(state, rng);
                Ok(SampledAction {
                    action: s.action.to_move(m),
                    log_prob: s.log_prob,
                    value: s.value,
                })
            }
            Policy::AttackMaximal => match attack_maximal(state, rng) {
                Ok(s) => Ok(SampledAction {
                    action: s.action.to_move(m),
                    log_prob: s.log_prob,
                    value: s.value,
                }),
                Err(Error::NoLegalAction) => {
                    log::warn!("attack-maximal has no attack target, falling back to recon");
                    recon_only(mask, slots, rng)
                }
                Err(e) => Err(e),
            },
            Policy::ReconOnly => recon_only(mask, slots, rng),
            Policy::Random => uniform_over_mask(mask, slots, rng),
            Policy::Flat { net } => act_flat(net, obs, mask, slots, rng),
            Policy::Autoregressive { nets } => {
                act_autoregressive(nets, obs, &StageMasks::from_flat(mask, slots), rng)
            }
        }
    }

    /// Networks expected by this policy for the given game dimensions, if any.
    pub fn check_dimensions(&self, role: Role, node_count: usize, m: usize) -> Result<()> {
        let obs = observation_len(role, node_count, m);
        let flat = node_count * (m + 1);
        let check = |expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::Dimension { expected, got })
            }
        };
        match self {
            Policy::Flat { net } => {
                check(obs, net.input_dim())?;
                check(flat, net.action_count())
            }
            Policy::Autoregressive { nets } => {
                check(obs, nets.node_net.input_dim())?;
                check(node_count, nets.node_net.action_count())?;
                check(obs + node_count, nets.type_net.input_dim())?;
                check(m + 1, nets.type_net.action_count())
            }
            _ => Ok(()),
        }
    }
}

fn recon_only<R: Rng + ?Sized>(mask: &[bool], slots: usize, rng: &mut R) -> Result<SampledMove> {
    let mut recon = vec![false; mask.len()];
    for (i, &legal) in mask.iter().enumerate() {
        recon[i] = legal && i % slots == slots - 1;
    }
    uniform_over_mask(&recon, slots, rng)
}
