//! The three evaluation scenarios on the diamond topology and the random
//! defense permutation applied before training runs.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameConstants, Topology};

pub const SCENARIO_M: usize = 4;
pub const SCENARIO_W: u32 = 9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub topology: Topology,
    pub constants: GameConstants,
    /// `[node][m + 1]`, last column is detection.
    pub initial_defense: Vec<Vec<u32>>,
    /// `[node][m]`, always zero.
    pub initial_attack: Vec<Vec<u32>>,
}

impl ScenarioSpec {
    /// Builds a spec with zero attack values from explicit defense rows.
    pub fn new(
        topology: Topology,
        constants: GameConstants,
        initial_defense: Vec<Vec<u32>>,
    ) -> Result<Self> {
        let spec = Self {
            initial_attack: vec![vec![0; constants.m]; topology.node_count()],
            topology,
            constants,
            initial_defense,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        let n = self.topology.node_count();
        let (m, w) = (self.constants.m, self.constants.w);
        if self.initial_defense.len() != n || self.initial_defense.iter().any(|r| r.len() != m + 1)
        {
            return Err(Error::Shape("initial defense must be [node][m + 1]"));
        }
        if self.initial_attack.len() != n || self.initial_attack.iter().any(|r| r.len() != m) {
            return Err(Error::Shape("initial attack must be [node][m]"));
        }
        if self.initial_attack.iter().flatten().any(|&v| v != 0) {
            return Err(Error::InvalidState("initial attack values must be zero"));
        }
        if self.initial_defense.iter().flatten().any(|&v| v > w) {
            return Err(Error::AttributeOutOfRange);
        }
        if self.initial_defense[self.topology.start_id()].iter().any(|&v| v != 0) {
            return Err(Error::InvalidState("the start node carries no defenses"));
        }
        Ok(())
    }
}

/// Scenario 1: every node has a single vulnerable attribute.
/// Scenario 2: only the left intermediate node is vulnerable.
/// Scenario 3: weak defenses and weak detection everywhere.
pub fn build_scenario(id: u8) -> Result<ScenarioSpec> {
    let rows: [[u32; 5]; 3] = match id {
        1 => [[9, 1, 7, 8, 1], [9, 7, 1, 8, 1], [5, 9, 8, 1, 1]],
        2 => [[1, 9, 9, 8, 1], [9, 9, 9, 8, 1], [9, 1, 5, 8, 1]],
        3 => [[1, 1, 1, 1, 1]; 3],
        other => return Err(Error::UnknownScenario(other)),
    };
    let mut defense = vec![vec![0; SCENARIO_M + 1]];
    defense.extend(rows.iter().map(|r| r.to_vec()));
    ScenarioSpec::new(
        Topology::diamond(),
        GameConstants::new(SCENARIO_M, SCENARIO_W)?,
        defense,
    )
}

/// Shuffles the first `m` defense values of every defender-owned node
/// independently. Detection values and the start row stay in place.
pub fn permute_defenses<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> ScenarioSpec {
    let mut out = spec.clone();
    let m = spec.constants.m;
    let start = spec.topology.start_id();
    for (node, row) in out.initial_defense.iter_mut().enumerate() {
        if node != start {
            row[..m].shuffle(rng);
        }
    }
    out
}
