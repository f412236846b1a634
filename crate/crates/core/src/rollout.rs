//! Playing games between two policies and collecting training batches.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{AttackerAction, DefenderAction, GameState, Role, RoleAction, Status};
use crate::policies::Policy;
use crate::rl::RolloutBatch;
use crate::scenarios::{permute_defenses, ScenarioSpec};

/// Win/draw counts over a set of games.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub attacker_wins: u32,
    pub defender_wins: u32,
    pub draws: u32,
    pub rounds: u64,
}

impl Tally {
    pub fn games(&self) -> u32 {
        self.attacker_wins + self.defender_wins + self.draws
    }

    pub fn record(&mut self, status: Status, rounds: u32) {
        match status {
            Status::AttackerWin => self.attacker_wins += 1,
            Status::DefenderWin => self.defender_wins += 1,
            Status::Draw => self.draws += 1,
            Status::Ongoing => return,
        }
        self.rounds += u64::from(rounds);
    }

    pub fn merge(&mut self, other: &Tally) {
        self.attacker_wins += other.attacker_wins;
        self.defender_wins += other.defender_wins;
        self.draws += other.draws;
        self.rounds += other.rounds;
    }

    fn ratio(&self, count: u32) -> f64 {
        match self.games() {
            0 => 0.0,
            n => f64::from(count) / f64::from(n),
        }
    }

    pub fn attacker_win_ratio(&self) -> f64 {
        self.ratio(self.attacker_wins)
    }

    pub fn defender_win_ratio(&self) -> f64 {
        self.ratio(self.defender_wins)
    }

    pub fn draw_ratio(&self) -> f64 {
        self.ratio(self.draws)
    }

    pub fn mean_length(&self) -> f64 {
        match self.games() {
            0 => 0.0,
            n => self.rounds as f64 / f64::from(n),
        }
    }
}

/// One round of a played game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub defender: DefenderAction,
    pub attacker: AttackerAction,
    pub detected: bool,
    pub compromised: Vec<usize>,
    pub status: Status,
    pub attacker_reward: i32,
    pub defender_reward: i32,
}

fn choose<A: RoleAction, R: Rng + ?Sized>(
    policy: &Policy,
    state: &GameState,
    rng: &mut R,
) -> Result<(A, crate::policies::SampledMove, Vec<f64>, Vec<bool>)> {
    let obs = if policy.is_neural() {
        state.observation(A::ROLE)
    } else {
        Vec::new()
    };
    let mask = state.legal_mask(A::ROLE);
    let sampled = policy.act_observed(state, A::ROLE, &obs, &mask, rng)?;
    let action = A::from_move(sampled.action, state.constants.m);
    Ok((action, sampled, obs, mask))
}

/// Plays one game to completion. Detection draws come from `env_rng`, action
/// sampling from `policy_rng`. Every round is passed to `on_round`.
pub fn play_game_with<R1, R2, F>(
    spec: &ScenarioSpec,
    attacker: &Policy,
    defender: &Policy,
    max_rounds: u32,
    env_rng: &mut R1,
    policy_rng: &mut R2,
    mut on_round: F,
) -> Result<GameState>
where
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
    F: FnMut(&GameState, RoundRecord),
{
    let mut state = GameState::new(spec, max_rounds)?;
    while !state.status.is_terminal() {
        let (d, _, _, _) = choose::<DefenderAction, _>(defender, &state, policy_rng)?;
        let (a, _, _, _) = choose::<AttackerAction, _>(attacker, &state, policy_rng)?;
        let result = state.step(d, a, env_rng)?;
        on_round(
            &state,
            RoundRecord {
                round: state.round,
                defender: d,
                attacker: a,
                detected: result.detected,
                compromised: result.compromised_nodes_this_round,
                status: result.status,
                attacker_reward: result.attacker_reward,
                defender_reward: result.defender_reward,
            },
        );
    }
    Ok(state)
}

pub fn play_game<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    spec: &ScenarioSpec,
    attacker: &Policy,
    defender: &Policy,
    max_rounds: u32,
    env_rng: &mut R1,
    policy_rng: &mut R2,
) -> Result<GameState> {
    play_game_with(spec, attacker, defender, max_rounds, env_rng, policy_rng, |_, _| {})
}

/// Plays `games` games and counts the outcomes.
pub fn evaluate<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    spec: &ScenarioSpec,
    attacker: &Policy,
    defender: &Policy,
    games: u32,
    max_rounds: u32,
    env_rng: &mut R1,
    policy_rng: &mut R2,
) -> Result<Tally> {
    let mut tally = Tally::default();
    for _ in 0..games {
        let end = play_game(spec, attacker, defender, max_rounds, env_rng, policy_rng)?;
        tally.record(end.status, end.round);
    }
    Ok(tally)
}

/// Which roles to record and how to vary the scenario between episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RolloutOptions {
    pub record_attacker: bool,
    pub record_defender: bool,
    /// Shuffle defense values within each node at the start of every episode.
    pub permute_each_episode: bool,
    pub batch_size: usize,
    pub max_rounds: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub attacker: Option<RolloutBatch>,
    pub defender: Option<RolloutBatch>,
    pub tally: Tally,
}

/// Plays whole episodes until at least `batch_size` rounds have been
/// collected. Each recorded step carries the observation, legality mask,
/// chosen move, its log-probability, the value estimate and the role's reward.
pub fn collect_rollout<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    spec: &ScenarioSpec,
    attacker: &Policy,
    defender: &Policy,
    options: &RolloutOptions,
    env_rng: &mut R1,
    policy_rng: &mut R2,
) -> Result<Rollout> {
    if options.batch_size == 0 {
        return Err(Error::Empty);
    }
    let n = spec.topology.node_count();
    let m = spec.constants.m;
    let slots = spec.constants.slots();
    let new_batch = |role: Role| {
        RolloutBatch::new(crate::game::observation_len(role, n, m), n * slots, slots)
    };
    let mut att = options.record_attacker.then(|| new_batch(Role::Attacker));
    let mut def = options.record_defender.then(|| new_batch(Role::Defender));
    if att.is_some() && !attacker.is_neural() || def.is_some() && !defender.is_neural() {
        return Err(Error::PolicyMismatch);
    }
    let mut tally = Tally::default();
    let mut steps = 0usize;
    let mut episode = 0u32;
    let mut permuted;

    while steps < options.batch_size {
        let episode_spec = if options.permute_each_episode {
            permuted = permute_defenses(spec, env_rng);
            &permuted
        } else {
            spec
        };
        let mut state = GameState::new(episode_spec, options.max_rounds)?;
        while !state.status.is_terminal() {
            let (d, ds, dobs, dmask) = choose::<DefenderAction, _>(defender, &state, policy_rng)?;
            let (a, asamp, aobs, amask) = choose::<AttackerAction, _>(attacker, &state, policy_rng)?;
            let result = state.step(d, a, env_rng)?;
            let done = result.status.is_terminal();
            if let Some(b) = att.as_mut() {
                b.push(
                    &aobs,
                    &amask,
                    asamp.action,
                    asamp.log_prob,
                    asamp.value,
                    f64::from(result.attacker_reward),
                    done,
                    episode,
                );
            }
            if let Some(b) = def.as_mut() {
                b.push(
                    &dobs,
                    &dmask,
                    ds.action,
                    ds.log_prob,
                    ds.value,
                    f64::from(result.defender_reward),
                    done,
                    episode,
                );
            }
            steps += 1;
        }
        tally.record(state.status, state.round);
        episode += 1;
    }
    Ok(Rollout {
        attacker: att,
        defender: def,
        tally,
    })
}
