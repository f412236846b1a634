//! Single-game transcripts and their replayable JSON state traces.

use anyhow::{bail, ensure};
use idsgame_core::game::{AttackerAction, DefenderAction};
use idsgame_core::rollout::{play_game_with, RoundRecord};
use idsgame_core::{GameState, Policy, ScenarioSpec, Status};
use serde::{Deserialize, Serialize};

use crate::formats::{state_hash, ScenarioFile};
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRound {
    #[serde(flatten)]
    pub record: RoundRecord,
    pub state_hash: String,
}

/// Everything needed to replay a game: the detection draws are regenerated
/// from `seed`, the actions are taken from `rounds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTrace {
    pub scenario: ScenarioFile,
    pub seed: u64,
    pub max_rounds: u32,
    pub initial_state_hash: String,
    pub rounds: Vec<TraceRound>,
    pub outcome: Status,
    pub final_state: GameState,
}

fn describe_defender(a: DefenderAction) -> String {
    match a {
        DefenderAction::Monitor { node } => format!("monitor n{node}"),
        DefenderAction::Defend { node, defense_type } => format!("defend n{node} type {defense_type}"),
    }
}

fn describe_attacker(a: AttackerAction) -> String {
    match a {
        AttackerAction::Recon { node } => format!("recon n{node}"),
        AttackerAction::Attack { node, attack_type } => format!("attack n{node} type {attack_type}"),
    }
}

pub fn transcript_line(r: &RoundRecord) -> String {
    let detection = match r.attacker {
        AttackerAction::Recon { .. } => "no draw",
        AttackerAction::Attack { .. } if !r.compromised.is_empty() => "no draw",
        AttackerAction::Attack { .. } if r.detected => "detected",
        AttackerAction::Attack { .. } => "undetected",
    };
    let compromised = if r.compromised.is_empty() {
        "-".to_string()
    } else {
        r.compromised.iter().map(|n| format!("n{n}")).collect::<Vec<_>>().join(",")
    };
    format!(
        "round {:>3} | defender: {:<20} | attacker: {:<18} | detection: {:<10} | compromised: {:<5} | {:?}",
        r.round,
        describe_defender(r.defender),
        describe_attacker(r.attacker),
        detection,
        compromised,
        r.status
    )
}

/// Plays one game and returns the transcript lines and the trace.
pub fn simulate(
    spec: &ScenarioSpec,
    attacker: &Policy,
    defender: &Policy,
    seed: u64,
    max_rounds: u32,
) -> anyhow::Result<(Vec<String>, GameTrace)> {
    let mut env = seeding::stream(seed, seeding::SIMULATE_ENV);
    let mut pol = seeding::stream(seed, seeding::SIMULATE_POLICY);
    let initial = GameState::new(spec, max_rounds)?;
    let mut rounds = Vec::new();
    let end = play_game_with(spec, attacker, defender, max_rounds, &mut env, &mut pol, |state, record| {
        rounds.push(TraceRound {
            record,
            state_hash: state_hash(state),
        });
    })?;
    let lines = rounds.iter().map(|r| transcript_line(&r.record)).collect();
    Ok((
        lines,
        GameTrace {
            scenario: ScenarioFile::from_spec(spec),
            seed,
            max_rounds,
            initial_state_hash: state_hash(&initial),
            rounds,
            outcome: end.status,
            final_state: end,
        },
    ))
}

/// Re-executes the recorded actions and checks every state hash.
pub fn replay(trace: &GameTrace) -> anyhow::Result<GameState> {
    let spec = trace.scenario.clone().into_spec()?;
    let mut state = GameState::new(&spec, trace.max_rounds)?;
    ensure!(state_hash(&state) == trace.initial_state_hash, "initial state hash differs");
    let mut env = seeding::stream(trace.seed, seeding::SIMULATE_ENV);
    for r in &trace.rounds {
        let result = state.step(r.record.defender, r.record.attacker, &mut env)?;
        if result.detected != r.record.detected || result.status != r.record.status {
            bail!("round {} resolved differently on replay", r.record.round);
        }
        if state_hash(&state) != r.state_hash {
            bail!("state hash differs after round {}", r.record.round);
        }
    }
    ensure!(state.status == trace.outcome, "replayed outcome differs");
    ensure!(state == trace.final_state, "replayed final state differs");
    Ok(state)
}
