//! Two-player intrusion-prevention game on a small network, with neural
//! policies and policy-gradient training.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod game;
pub mod neural;
pub mod policies;
pub mod rl;
pub mod rollout;
pub mod scenarios;

pub use error::{Error, Result};
pub use game::{
    AttackerAction, DefenderAction, GameConstants, GameState, Move, NodeId, Role, Status,
    StepResult, Topology,
};
pub use policies::{AutoregressiveNets, Policy};
pub use rl::{update_policy, Algo, Hyperparams, Optimizer, RolloutBatch, UpdateReport};
pub use rollout::{collect_rollout, evaluate, play_game, play_game_with, RolloutOptions, Tally};
pub use scenarios::{build_scenario, permute_defenses, ScenarioSpec};
