//! Round-based attacker/defender intrusion prevention game.
//!
//! The infrastructure is an undirected graph. Every node carries `m` attack
//! attributes (known only to the attacker) and `m + 1` defense attributes, the
//! last of which is the detection capability. All attributes are integers in
//! `[0, w]`.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenarios::ScenarioSpec;

pub type NodeId = usize;

/// Default episode cap; a game still ongoing after this many rounds is a draw.
pub const DEFAULT_MAX_ROUNDS: u32 = 100;

/// Sentinel written into attacker observations for defense values it has not seen.
pub const UNKNOWN_DEFENSE: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConstants {
    /// Number of attack types.
    pub m: usize,
    /// Maximum attribute value.
    pub w: u32,
}

impl GameConstants {
    pub fn new(m: usize, w: u32) -> Result<Self> {
        let constants = Self { m, w };
        constants.validate()?;
        Ok(constants)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConstants("m must be at least 1"));
        }
        if self.w == 0 {
            return Err(Error::InvalidConstants("w must be at least 1"));
        }
        Ok(())
    }

    /// Attributes per node for one of the two-level choices (types plus recon/monitor).
    pub fn slots(&self) -> usize {
        self.m + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TopologyRepr {
    node_count: usize,
    edges: Vec<(NodeId, NodeId)>,
    start_id: NodeId,
    data_id: NodeId,
}

/// Undirected, connected infrastructure graph with the attacker's machine and the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TopologyRepr", into = "TopologyRepr")]
pub struct Topology {
    node_count: usize,
    edges: Vec<(NodeId, NodeId)>,
    start_id: NodeId,
    data_id: NodeId,
    neighbors: Vec<Vec<NodeId>>,
}

impl Topology {
    /// Builds a validated topology. Edges are normalized to `(low, high)`,
    /// sorted and deduplicated.
    pub fn new(
        node_count: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
        start_id: NodeId,
        data_id: NodeId,
    ) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::InvalidTopology("at least two nodes are required"));
        }
        if start_id >= node_count || data_id >= node_count {
            return Err(Error::InvalidTopology("start or data id out of range"));
        }
        if start_id == data_id {
            return Err(Error::InvalidTopology("start and data must differ"));
        }
        let mut normalized = Vec::new();
        for (a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(Error::InvalidTopology("edge references an unknown node"));
            }
            if a == b {
                return Err(Error::InvalidTopology("self-loops are not allowed"));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        normalized.dedup();

        let mut neighbors = vec![Vec::new(); node_count];
        for &(a, b) in &normalized {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        let topology = Self {
            node_count,
            edges: normalized,
            start_id,
            data_id,
            neighbors,
        };
        if !topology.is_connected() {
            return Err(Error::InvalidTopology("graph is not connected"));
        }
        Ok(topology)
    }

    /// The four-node diamond `start -- {n1, n2} -- data` with ids 0..=3.
    pub fn diamond() -> Self {
        Self::new(4, [(0, 1), (0, 2), (1, 3), (2, 3)], 0, 3).expect("diamond is valid")
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn start_id(&self) -> NodeId {
        self.start_id
    }

    pub fn data_id(&self) -> NodeId {
        self.data_id
    }

    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.neighbors[node]
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![self.start_id];
        seen[self.start_id] = true;
        while let Some(node) = stack.pop() {
            for &next in &self.neighbors[node] {
                if !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

impl TryFrom<TopologyRepr> for Topology {
    type Error = Error;

    fn try_from(repr: TopologyRepr) -> Result<Self> {
        Topology::new(repr.node_count, repr.edges, repr.start_id, repr.data_id)
    }
}

impl From<Topology> for TopologyRepr {
    fn from(t: Topology) -> Self {
        Self {
            node_count: t.node_count,
            edges: t.edges,
            start_id: t.start_id,
            data_id: t.data_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Ongoing,
    AttackerWin,
    DefenderWin,
    Draw,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Ongoing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Attacker,
    Defender,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackerAction {
    Recon { node: NodeId },
    Attack { node: NodeId, attack_type: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DefenderAction {
    Monitor { node: NodeId },
    Defend { node: NodeId, defense_type: usize },
}

/// Role-neutral form of an action: a node plus a slot in `[0, m]`, where slot
/// `m` is recon (attacker) or monitor (defender).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Move {
    pub node: NodeId,
    pub slot: usize,
}

/// Conversion between typed actions and [`Move`].
pub trait RoleAction: Copy + core::fmt::Debug {
    const ROLE: Role;
    fn from_move(mv: Move, m: usize) -> Self;
    fn to_move(self, m: usize) -> Move;
}

impl RoleAction for AttackerAction {
    const ROLE: Role = Role::Attacker;

    fn from_move(mv: Move, m: usize) -> Self {
        if mv.slot == m {
            AttackerAction::Recon { node: mv.node }
        } else {
            AttackerAction::Attack {
                node: mv.node,
                attack_type: mv.slot,
            }
        }
    }

    fn to_move(self, m: usize) -> Move {
        match self {
            AttackerAction::Recon { node } => Move { node, slot: m },
            AttackerAction::Attack { node, attack_type } => Move {
                node,
                slot: attack_type,
            },
        }
    }
}

impl RoleAction for DefenderAction {
    const ROLE: Role = Role::Defender;

    fn from_move(mv: Move, m: usize) -> Self {
        if mv.slot == m {
            DefenderAction::Monitor { node: mv.node }
        } else {
            DefenderAction::Defend {
                node: mv.node,
                defense_type: mv.slot,
            }
        }
    }

    fn to_move(self, m: usize) -> Move {
        match self {
            DefenderAction::Monitor { node } => Move { node, slot: m },
            DefenderAction::Defend { node, defense_type } => Move {
                node,
                slot: defense_type,
            },
        }
    }
}

impl AttackerAction {
    pub fn node(self) -> NodeId {
        match self {
            AttackerAction::Recon { node } | AttackerAction::Attack { node, .. } => node,
        }
    }
}

impl DefenderAction {
    pub fn node(self) -> NodeId {
        match self {
            DefenderAction::Monitor { node } | DefenderAction::Defend { node, .. } => node,
        }
    }
}

/// Outcome of one round. The successor state is the mutated [`GameState`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub attacker_reward: i32,
    pub defender_reward: i32,
    pub detected: bool,
    pub compromised_nodes_this_round: Vec<NodeId>,
    pub status: Status,
}

/// Full joint state of one game. Field order is the canonical serialization order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameState {
    pub constants: GameConstants,
    pub topology: Topology,
    /// `[node][m]`
    pub attack: Vec<Vec<u32>>,
    /// `[node][m + 1]`, column `m` is detection.
    pub defense: Vec<Vec<u32>>,
    pub compromised: BTreeSet<NodeId>,
    pub reconned: BTreeSet<NodeId>,
    pub round: u32,
    pub max_rounds: u32,
    pub status: Status,
}

impl GameState {
    pub fn new(spec: &ScenarioSpec, max_rounds: u32) -> Result<Self> {
        spec.validate()?;
        if max_rounds == 0 {
            return Err(Error::InvalidConstants("max_rounds must be positive"));
        }
        let n = spec.topology.node_count();
        let mut compromised = BTreeSet::new();
        compromised.insert(spec.topology.start_id());
        Ok(Self {
            constants: spec.constants,
            topology: spec.topology.clone(),
            attack: vec![vec![0; spec.constants.m]; n],
            defense: spec.initial_defense.clone(),
            compromised,
            reconned: BTreeSet::new(),
            round: 0,
            max_rounds,
            status: Status::Ongoing,
        })
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    /// Checks the structural invariants; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        let n = self.node_count();
        let (m, w) = (self.constants.m, self.constants.w);
        if self.attack.len() != n || self.attack.iter().any(|r| r.len() != m) {
            return Err(Error::Shape("attack matrix must be [node][m]"));
        }
        if self.defense.len() != n || self.defense.iter().any(|r| r.len() != m + 1) {
            return Err(Error::Shape("defense matrix must be [node][m + 1]"));
        }
        let in_range = |rows: &[Vec<u32>]| rows.iter().flatten().all(|&v| v <= w);
        if !in_range(&self.attack) || !in_range(&self.defense) {
            return Err(Error::AttributeOutOfRange);
        }
        if !self.compromised.contains(&self.topology.start_id()) {
            return Err(Error::InvalidState("start node must be compromised"));
        }
        if self.compromised.iter().chain(&self.reconned).any(|&k| k >= n) {
            return Err(Error::InvalidState("node set references an unknown node"));
        }
        let data_taken = self.compromised.contains(&self.topology.data_id());
        if data_taken != (self.status == Status::AttackerWin) {
            return Err(Error::InvalidState(
                "data node compromised iff the attacker has won",
            ));
        }
        Ok(())
    }

    pub fn is_compromised(&self, node: NodeId) -> bool {
        self.compromised.contains(&node)
    }

    /// Nodes the attacker can act on: compromised nodes and all their neighbors.
    pub fn visible_nodes(&self) -> BTreeSet<NodeId> {
        let mut visible = BTreeSet::new();
        for &node in &self.compromised {
            visible.insert(node);
            visible.extend(self.topology.neighbors(node).iter().copied());
        }
        visible
    }

    fn visibility_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.node_count()];
        for &node in &self.compromised {
            flags[node] = true;
            for &next in self.topology.neighbors(node) {
                flags[next] = true;
            }
        }
        flags
    }

    /// Flat legality mask of length `|N| * (m + 1)`, indexed `node * (m + 1) + slot`.
    pub fn legal_mask(&self, role: Role) -> Vec<bool> {
        let n = self.node_count();
        let slots = self.constants.slots();
        let m = self.constants.m;
        let mut mask = vec![false; n * slots];
        if self.status.is_terminal() {
            return mask;
        }
        match role {
            Role::Attacker => {
                let visible = self.visibility_flags();
                for node in (0..n).filter(|&k| visible[k]) {
                    let row = &mut mask[node * slots..(node + 1) * slots];
                    row[m] = true;
                    if !self.is_compromised(node) {
                        row[..m].fill(true);
                    }
                }
            }
            Role::Defender => {
                let start = self.topology.start_id();
                for node in (0..n).filter(|&k| k != start) {
                    mask[node * slots..(node + 1) * slots].fill(true);
                }
            }
        }
        mask
    }

    /// Legal attacker actions ordered by node id, attacks before recon.
    pub fn legal_attacker_actions(&self) -> Vec<AttackerAction> {
        self.legal_moves(Role::Attacker)
            .map(|mv| AttackerAction::from_move(mv, self.constants.m))
            .collect()
    }

    /// Legal defender actions ordered by node id, defends before monitor.
    pub fn legal_defender_actions(&self) -> Vec<DefenderAction> {
        self.legal_moves(Role::Defender)
            .map(|mv| DefenderAction::from_move(mv, self.constants.m))
            .collect()
    }

    fn legal_moves(&self, role: Role) -> impl Iterator<Item = Move> {
        let slots = self.constants.slots();
        self.legal_mask(role)
            .into_iter()
            .enumerate()
            .filter(|&(_, legal)| legal)
            .map(move |(idx, _)| Move {
                node: idx / slots,
                slot: idx % slots,
            })
    }

    pub fn is_legal_attacker(&self, action: AttackerAction) -> bool {
        if self.status.is_terminal() {
            return false;
        }
        let node = action.node();
        if node >= self.node_count() {
            return false;
        }
        let visible = self.compromised.iter().any(|&c| {
            c == node || self.topology.neighbors(c).contains(&node)
        });
        match action {
            AttackerAction::Recon { .. } => visible,
            AttackerAction::Attack { attack_type, .. } => {
                visible && attack_type < self.constants.m && !self.is_compromised(node)
            }
        }
    }

    pub fn is_legal_defender(&self, action: DefenderAction) -> bool {
        if self.status.is_terminal() {
            return false;
        }
        let node = action.node();
        let type_ok = match action {
            DefenderAction::Monitor { .. } => true,
            DefenderAction::Defend { defense_type, .. } => defense_type < self.constants.m,
        };
        node < self.node_count() && node != self.topology.start_id() && type_ok
    }

    /// `defense[node][m] / (w + 1)`.
    pub fn detection_probability(&self, node: NodeId) -> Result<f64> {
        let row = self
            .defense
            .get(node)
            .ok_or(Error::UnknownNode(node))?;
        Ok(f64::from(row[self.constants.m]) / f64::from(self.constants.w + 1))
    }

    /// Plays one round. The defender's increment lands first, then the
    /// attacker's action resolves against the updated defenses. On error the
    /// state is left untouched.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        defender: DefenderAction,
        attacker: AttackerAction,
        rng: &mut R,
    ) -> Result<StepResult> {
        if self.status.is_terminal() {
            return Err(Error::GameOver);
        }
        if !self.is_legal_defender(defender) {
            return Err(Error::IllegalAction(Role::Defender));
        }
        if !self.is_legal_attacker(attacker) {
            return Err(Error::IllegalAction(Role::Attacker));
        }
        let (m, w) = (self.constants.m, self.constants.w);

        let (d_node, d_slot) = match defender {
            DefenderAction::Monitor { node } => (node, m),
            DefenderAction::Defend { node, defense_type } => (node, defense_type),
        };
        let cell = &mut self.defense[d_node][d_slot];
        *cell = (*cell + 1).min(w);

        let mut result = StepResult {
            attacker_reward: 0,
            defender_reward: 0,
            detected: false,
            compromised_nodes_this_round: Vec::new(),
            status: Status::Ongoing,
        };

        match attacker {
            AttackerAction::Recon { node } => {
                self.reconned.insert(node);
            }
            AttackerAction::Attack { node, attack_type } => {
                let value = &mut self.attack[node][attack_type];
                *value = (*value + 1).min(w);
                if *value > self.defense[node][attack_type] {
                    self.compromised.insert(node);
                    result.compromised_nodes_this_round.push(node);
                    if node == self.topology.data_id() {
                        self.status = Status::AttackerWin;
                    }
                } else {
                    let p = self.detection_probability(node)?;
                    if rng.random::<f64>() < p {
                        result.detected = true;
                        self.status = Status::DefenderWin;
                    }
                }
            }
        }

        self.round += 1;
        if self.status == Status::Ongoing && self.round >= self.max_rounds {
            self.status = Status::Draw;
        }
        let (a, d) = match self.status {
            Status::AttackerWin => (1, -1),
            Status::DefenderWin => (-1, 1),
            Status::Ongoing | Status::Draw => (0, 0),
        };
        result.attacker_reward = a;
        result.defender_reward = d;
        result.status = self.status;
        Ok(result)
    }

    /// Length of [`GameState::attacker_observation`].
    pub fn attacker_observation_len(n: usize, m: usize) -> usize {
        n * (2 * m + 3)
    }

    /// Length of [`GameState::defender_observation`].
    pub fn defender_observation_len(n: usize, m: usize) -> usize {
        (n - 1) * (m + 1)
    }

    /// Per node: `m` attack values / w, then `m + 1` defense values / w (or
    /// [`UNKNOWN_DEFENSE`] unless reconned or compromised), then the visible
    /// flag and the compromised flag.
    pub fn attacker_observation(&self) -> Vec<f64> {
        let n = self.node_count();
        let m = self.constants.m;
        let scale = 1.0 / f64::from(self.constants.w);
        let visible = self.visibility_flags();
        let mut obs = Vec::with_capacity(Self::attacker_observation_len(n, m));
        for node in 0..n {
            obs.extend(self.attack[node].iter().map(|&v| f64::from(v) * scale));
            let compromised = self.is_compromised(node);
            if compromised || self.reconned.contains(&node) {
                obs.extend(self.defense[node].iter().map(|&v| f64::from(v) * scale));
            } else {
                obs.extend(core::iter::repeat_n(UNKNOWN_DEFENSE, m + 1));
            }
            obs.push(if visible[node] { 1.0 } else { 0.0 });
            obs.push(if compromised { 1.0 } else { 0.0 });
        }
        obs
    }

    /// Defense values of every node except the attacker's machine, scaled by 1/w.
    pub fn defender_observation(&self) -> Vec<f64> {
        let n = self.node_count();
        let start = self.topology.start_id();
        let scale = 1.0 / f64::from(self.constants.w);
        let mut obs = Vec::with_capacity(Self::defender_observation_len(n, self.constants.m));
        for node in (0..n).filter(|&k| k != start) {
            obs.extend(self.defense[node].iter().map(|&v| f64::from(v) * scale));
        }
        obs
    }

    pub fn observation(&self, role: Role) -> Vec<f64> {
        match role {
            Role::Attacker => self.attacker_observation(),
            Role::Defender => self.defender_observation(),
        }
    }

    pub fn observation_len(&self, role: Role) -> usize {
        observation_len(role, self.node_count(), self.constants.m)
    }
}

pub fn observation_len(role: Role, n: usize, m: usize) -> usize {
    match role {
        Role::Attacker => GameState::attacker_observation_len(n, m),
        Role::Defender => GameState::defender_observation_len(n, m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::build_scenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario_state(id: u8) -> GameState {
        GameState::new(&build_scenario(id).unwrap(), DEFAULT_MAX_ROUNDS).unwrap()
    }

    #[test]
    fn new_game_initialization() {
        let s3 = scenario_state(3);
        assert!(s3.attack.iter().flatten().all(|&v| v == 0));
        for node in 1..4 {
            assert_eq!(s3.defense[node], vec![1; 5]);
        }
        assert_eq!(s3.compromised.len(), 1);
        assert!(s3.compromised.contains(&0));
        assert!(s3.reconned.is_empty());
        assert_eq!(s3.round, 0);
        assert_eq!(s3.status, Status::Ongoing);

        let s1 = scenario_state(1);
        assert_eq!(s1.defense[s1.topology.data_id()], vec![5, 9, 8, 1, 1]);
    }

    #[test]
    fn new_game_rejects_bad_spec() {
        let mut spec = build_scenario(1).unwrap();
        spec.initial_defense[1][0] = 10;
        assert!(GameState::new(&spec, 10).is_err());
        let mut spec = build_scenario(1).unwrap();
        spec.initial_defense[2].pop();
        assert!(GameState::new(&spec, 10).is_err());
    }

    #[test]
    fn topology_validation() {
        assert!(Topology::new(3, [(0, 1)], 0, 2).is_err());
        assert!(Topology::new(2, [(0, 0), (0, 1)], 0, 1).is_err());
        assert!(Topology::new(2, [(0, 1)], 1, 1).is_err());
        assert!(Topology::new(2, [(0, 5)], 0, 1).is_err());
        let t = Topology::new(3, [(2, 1), (1, 0), (0, 1)], 0, 2).unwrap();
        assert_eq!(t.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn visibility_closure() {
        let mut s = scenario_state(1);
        assert_eq!(s.visible_nodes().into_iter().collect::<Vec<_>>(), vec![0, 1, 2]);
        s.compromised.insert(1);
        assert_eq!(
            s.visible_nodes().into_iter().collect::<Vec<_>>(),
            vec![0, 1, 2, 3]
        );
    }

    #[test]
    fn visibility_on_a_path() {
        let t = Topology::new(3, [(0, 1), (1, 2)], 0, 2).unwrap();
        let spec = ScenarioSpec {
            topology: t,
            constants: GameConstants::new(1, 3).unwrap(),
            initial_defense: vec![vec![0, 0], vec![1, 1], vec![1, 1]],
            initial_attack: vec![vec![0]; 3],
        };
        let s = GameState::new(&spec, 10).unwrap();
        assert_eq!(s.visible_nodes().into_iter().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn attacker_action_counts() {
        let mut s = scenario_state(1);
        let actions = s.legal_attacker_actions();
        assert_eq!(actions.len(), 11);
        let recon = actions
            .iter()
            .filter(|a| matches!(a, AttackerAction::Recon { .. }))
            .count();
        assert_eq!(recon, 3);
        assert!(!actions
            .iter()
            .any(|a| matches!(a, AttackerAction::Attack { node: 0, .. })));

        // make data visible without compromising anything new: reveal through n1
        s.compromised.insert(1);
        let attacks = s
            .legal_attacker_actions()
            .into_iter()
            .filter(|a| matches!(a, AttackerAction::Attack { .. }))
            .count();
        assert_eq!(attacks, 2 * 4);

        s.status = Status::Draw;
        assert!(s.legal_attacker_actions().is_empty());
    }

    #[test]
    fn defender_action_counts() {
        let mut s = scenario_state(2);
        assert_eq!(s.legal_defender_actions().len(), 15);
        s.status = Status::DefenderWin;
        assert!(s.legal_defender_actions().is_empty());

        let spec = ScenarioSpec {
            topology: Topology::new(2, [(0, 1)], 0, 1).unwrap(),
            constants: GameConstants::new(1, 9).unwrap(),
            initial_defense: vec![vec![0, 0], vec![3, 1]],
            initial_attack: vec![vec![0]; 2],
        };
        let s = GameState::new(&spec, 10).unwrap();
        assert_eq!(s.legal_defender_actions().len(), 2);
    }

    #[test]
    fn detection_probability_formula() {
        let mut s = scenario_state(1);
        assert!((s.detection_probability(1).unwrap() - 0.1).abs() < 1e-15);
        s.defense[1][4] = 0;
        assert_eq!(s.detection_probability(1).unwrap(), 0.0);
        s.defense[1][4] = 9;
        assert!((s.detection_probability(1).unwrap() - 0.9).abs() < 1e-15);
        assert!(matches!(s.detection_probability(7), Err(Error::UnknownNode(7))));
    }

    #[test]
    fn compromise_requires_strict_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = scenario_state(3);
        s.defense[1][4] = 0; // no detection
        let monitor_data = DefenderAction::Monitor { node: 3 };
        let hit = AttackerAction::Attack { node: 1, attack_type: 0 };
        let r = s.step(monitor_data, hit, &mut rng).unwrap();
        assert_eq!(s.attack[1][0], 1);
        assert!(r.compromised_nodes_this_round.is_empty());
        assert!(!r.detected);
        let r = s.step(monitor_data, hit, &mut rng).unwrap();
        assert_eq!(r.compromised_nodes_this_round, vec![1]);
        assert!(s.is_compromised(1));
        assert_eq!(r.status, Status::Ongoing);
        assert_eq!((r.attacker_reward, r.defender_reward), (0, 0));
    }

    #[test]
    fn equal_values_fail_and_trigger_detection() {
        let mut s = scenario_state(3);
        s.defense[1][4] = 9;
        s.constants.w = 9;
        let mut hits = 0;
        for seed in 0..200 {
            let mut g = s.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = g
                .step(
                    DefenderAction::Monitor { node: 2 },
                    AttackerAction::Attack { node: 1, attack_type: 0 },
                    &mut rng,
                )
                .unwrap();
            assert!(r.compromised_nodes_this_round.is_empty());
            if r.detected {
                hits += 1;
                assert_eq!(r.status, Status::DefenderWin);
                assert_eq!((r.attacker_reward, r.defender_reward), (-1, 1));
            }
        }
        assert!(hits > 150, "detection at 0.9 fired only {hits} / 200");
    }

    #[test]
    fn successful_compromise_is_never_detected() {
        let mut s = scenario_state(3);
        s.defense[1][4] = 9;
        s.attack[1][0] = 1;
        for seed in 0..100 {
            let mut g = s.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = g
                .step(
                    DefenderAction::Monitor { node: 1 },
                    AttackerAction::Attack { node: 1, attack_type: 0 },
                    &mut rng,
                )
                .unwrap();
            assert!(!r.detected);
            assert_eq!(r.compromised_nodes_this_round, vec![1]);
        }
    }

    #[test]
    fn defense_increment_lands_before_attack() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = scenario_state(3);
        s.defense[1][4] = 0;
        s.attack[1][0] = 1;
        let r = s
            .step(
                DefenderAction::Defend { node: 1, defense_type: 0 },
                AttackerAction::Attack { node: 1, attack_type: 0 },
                &mut rng,
            )
            .unwrap();
        // attack 2 vs hardened defense 2
        assert!(r.compromised_nodes_this_round.is_empty());
    }

    #[test]
    fn capturing_data_wins() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = scenario_state(3);
        s.compromised.insert(1);
        s.attack[3][2] = 1;
        let r = s
            .step(
                DefenderAction::Monitor { node: 2 },
                AttackerAction::Attack { node: 3, attack_type: 2 },
                &mut rng,
            )
            .unwrap();
        assert_eq!(r.status, Status::AttackerWin);
        assert_eq!((r.attacker_reward, r.defender_reward), (1, -1));
        assert!(s.step(
            DefenderAction::Monitor { node: 2 },
            AttackerAction::Recon { node: 0 },
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn recon_is_never_detected_and_round_cap_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = GameState::new(&build_scenario(1).unwrap(), 5).unwrap();
        s.defense[1][4] = 9;
        for round in 1..=5 {
            let r = s
                .step(
                    DefenderAction::Monitor { node: 1 },
                    AttackerAction::Recon { node: 1 },
                    &mut rng,
                )
                .unwrap();
            assert!(!r.detected);
            assert_eq!(s.round, round);
        }
        assert_eq!(s.status, Status::Draw);
        assert!(s.reconned.contains(&1));
    }

    #[test]
    fn illegal_actions_are_rejected_without_mutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = scenario_state(1);
        let before = s.clone();
        let hidden = AttackerAction::Recon { node: 3 };
        assert!(matches!(
            s.step(DefenderAction::Monitor { node: 1 }, hidden, &mut rng),
            Err(Error::IllegalAction(Role::Attacker))
        ));
        let on_start = DefenderAction::Monitor { node: 0 };
        assert!(matches!(
            s.step(on_start, AttackerAction::Recon { node: 1 }, &mut rng),
            Err(Error::IllegalAction(Role::Defender))
        ));
        let own = AttackerAction::Attack { node: 0, attack_type: 0 };
        assert!(s.step(DefenderAction::Monitor { node: 1 }, own, &mut rng).is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn attribute_saturation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = GameState::new(&build_scenario(2).unwrap(), 1000).unwrap();
        s.defense[2][4] = 0;
        for _ in 0..30 {
            s.step(
                DefenderAction::Defend { node: 2, defense_type: 0 },
                AttackerAction::Attack { node: 2, attack_type: 0 },
                &mut rng,
            )
            .unwrap();
        }
        assert_eq!(s.defense[2][0], 9);
        assert_eq!(s.attack[2][0], 9);
        assert!(!s.is_compromised(2));
    }

    #[test]
    fn attacker_observation_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut s = scenario_state(1);
        let obs = s.attacker_observation();
        assert_eq!(obs.len(), 44);
        for node in 0..4 {
            let row = &obs[node * 11..(node + 1) * 11];
            assert!(row[..4].iter().all(|&v| v == 0.0));
            if node == 0 {
                // start is compromised, so its (zero) defense row is visible
                assert!(row[4..9].iter().all(|&v| v == 0.0));
            } else {
                assert!(row[4..9].iter().all(|&v| v == UNKNOWN_DEFENSE));
            }
        }
        s.step(
            DefenderAction::Monitor { node: 3 },
            AttackerAction::Recon { node: 1 },
            &mut rng,
        )
        .unwrap();
        let obs = s.attacker_observation();
        let expect = [1.0, 1.0 / 9.0, 7.0 / 9.0, 8.0 / 9.0, 1.0 / 9.0];
        for (got, want) in obs[11 + 4..11 + 9].iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(obs[11 + 9], 1.0);
        assert_eq!(obs[11 + 10], 0.0);
        assert_eq!(obs[33 + 9], 0.0, "data is not visible yet");
    }

    #[test]
    fn defender_observation_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut s = scenario_state(3);
        let before = s.defender_observation();
        assert_eq!(before.len(), 15);
        assert!(before.iter().all(|&v| (v - 1.0 / 9.0).abs() < 1e-15));
        s.step(
            DefenderAction::Defend { node: 2, defense_type: 3 },
            AttackerAction::Recon { node: 1 },
            &mut rng,
        )
        .unwrap();
        let after = s.defender_observation();
        let changed: Vec<usize> = (0..15).filter(|&i| before[i] != after[i]).collect();
        assert_eq!(changed, vec![5 + 3]);
        assert!((after[8] - before[8] - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn move_conversion() {
        let a = AttackerAction::Recon { node: 2 };
        assert_eq!(a.to_move(4), Move { node: 2, slot: 4 });
        assert_eq!(AttackerAction::from_move(a.to_move(4), 4), a);
        let d = DefenderAction::Defend { node: 1, defense_type: 3 };
        assert_eq!(DefenderAction::from_move(d.to_move(4), 4), d);
    }
}
