//! Training against a static opponent and self-play with an opponent pool.

use std::collections::VecDeque;
use std::time::Instant;

use anyhow::{bail, Context};
use idsgame_core::rollout::{collect_rollout, RolloutOptions, Tally};
use idsgame_core::{
    play_game, update_policy, Algo, AutoregressiveNets, Optimizer, Policy, Role, ScenarioSpec,
    UpdateReport,
};
use idsgame_core::neural::{ActorCriticNet, NetShape};
use idsgame_core::game::observation_len;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Permute};
use crate::formats::{policy_hash, CurveRow};
use crate::seeding;

/// A frozen copy of a policy taken during self-play.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub role: Role,
    pub iteration: usize,
    pub policy: Policy,
    /// Hash of the policy at insertion time.
    pub hash: String,
}

impl Snapshot {
    pub fn is_intact(&self) -> bool {
        policy_hash(&self.policy) == self.hash
    }
}

/// Past policies of both roles in insertion order. The oldest entry is
/// dropped once `max_size` is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct OpponentPool {
    snapshots: VecDeque<Snapshot>,
    max_size: usize,
}

impl OpponentPool {
    pub fn new(max_size: usize) -> Self {
        assert!(max_size > 0, "pool must hold at least one snapshot");
        Self {
            snapshots: VecDeque::new(),
            max_size,
        }
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &Snapshot> {
        self.snapshots.iter()
    }

    pub fn insert(&mut self, role: Role, iteration: usize, policy: &Policy) {
        if self.snapshots.len() == self.max_size {
            self.snapshots.pop_front();
        }
        self.snapshots.push_back(Snapshot {
            role,
            iteration,
            policy: policy.clone(),
            hash: policy_hash(policy),
        });
    }

    /// Uniform draw among the snapshots of `role`.
    pub fn sample<R: Rng + ?Sized>(&self, role: Role, rng: &mut R) -> Option<&Snapshot> {
        let count = self.snapshots.iter().filter(|s| s.role == role).count();
        if count == 0 {
            return None;
        }
        let k = rng.random_range(0..count);
        self.snapshots.iter().filter(|s| s.role == role).nth(k)
    }
}

/// With probability `sample_p` an opponent of `role` is drawn from the pool;
/// `None` means the opponent's current policy. The Bernoulli draw is made
/// even when the pool is empty.
pub fn choose_opponent<'a, R: Rng + ?Sized>(
    pool: &'a OpponentPool,
    role: Role,
    sample_p: f64,
    rng: &mut R,
) -> Option<&'a Snapshot> {
    if rng.random_bool(sample_p) {
        pool.sample(role, rng)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub algo: Algo,
    pub policy: Policy,
    pub optimizer: Optimizer,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Agent {
    Static(Policy),
    Learning(Learner),
}

impl Agent {
    pub fn policy(&self) -> &Policy {
        match self {
            Agent::Static(p) => p,
            Agent::Learning(l) => &l.policy,
        }
    }

    pub fn algo(&self) -> Option<Algo> {
        match self {
            Agent::Static(_) => None,
            Agent::Learning(l) => Some(l.algo),
        }
    }

    fn learner_mut(&mut self) -> Option<&mut Learner> {
        match self {
            Agent::Static(_) => None,
            Agent::Learning(l) => Some(l),
        }
    }
}

/// Freshly initialized network policy for `role`.
pub fn new_learning_policy<R: Rng + ?Sized>(
    algo: Algo,
    role: Role,
    spec: &ScenarioSpec,
    hidden: &[usize],
    rng: &mut R,
) -> anyhow::Result<Policy> {
    let n = spec.topology.node_count();
    let slots = spec.constants.slots();
    let obs = observation_len(role, n, spec.constants.m);
    Ok(if algo.autoregressive() {
        Policy::Autoregressive {
            nets: AutoregressiveNets::new(obs, n, slots, hidden, rng)?,
        }
    } else {
        Policy::Flat {
            net: ActorCriticNet::new(NetShape::new(obs, n * slots, true).with_hidden(hidden), rng)?,
        }
    })
}

pub fn static_policy(role: Role) -> Policy {
    match role {
        Role::Attacker => Policy::AttackMaximal,
        Role::Defender => Policy::DefendMinimal,
    }
}

/// Plays `games` games with one independent generator pair per game and
/// sums the outcomes in game order.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_seeded(
    spec: &ScenarioSpec,
    attacker: &Policy,
    defender: &Policy,
    games: u32,
    max_rounds: u32,
    seed: u64,
    round_index: usize,
) -> anyhow::Result<Tally> {
    let results: Vec<idsgame_core::Result<Tally>> = (0..games)
        .into_par_iter()
        .map(|g| {
            let index = seeding::eval_index(round_index, g);
            let mut env = seeding::substream(seed, seeding::EVAL_ENV, index);
            let mut pol = seeding::substream(seed, seeding::EVAL_POLICY, index);
            let end = play_game(spec, attacker, defender, max_rounds, &mut env, &mut pol)?;
            let mut t = Tally::default();
            t.record(end.status, end.round);
            Ok(t)
        })
        .collect();
    let mut total = Tally::default();
    for r in results {
        total.merge(&r?);
    }
    Ok(total)
}

/// One training run (one seed).
pub struct Trainer {
    config: ExperimentConfig,
    seed: u64,
    train_spec: ScenarioSpec,
    eval_spec: ScenarioSpec,
    attacker: Agent,
    defender: Agent,
    pool: OpponentPool,
    pool_rng: ChaCha8Rng,
    pool_draws: u64,
    pool_hits: u64,
    iteration: usize,
    started: Instant,
}

impl Trainer {
    /// `spec` is the canonical scenario; with [`Permute::Run`] the training
    /// defenses are shuffled once here.
    pub fn new(config: &ExperimentConfig, spec: &ScenarioSpec, seed: u64) -> anyhow::Result<Self> {
        config.validate()?;
        let train_spec = match config.permute {
            Permute::Run => {
                idsgame_core::permute_defenses(spec, &mut seeding::stream(seed, seeding::PERMUTE))
            }
            Permute::Off | Permute::Episode => spec.clone(),
        };
        let eval_spec = if config.eval_on_training_scenario {
            train_spec.clone()
        } else {
            spec.clone()
        };
        let mut init = seeding::stream(seed, seeding::INIT);
        let mut agent = |role: Role| -> anyhow::Result<Agent> {
            Ok(match config.learner_algo(role) {
                None => Agent::Static(static_policy(role)),
                Some(algo) => {
                    let policy = new_learning_policy(algo, role, spec, &config.hidden, &mut init)?;
                    Agent::Learning(Learner {
                        algo,
                        optimizer: Optimizer::for_policy(&policy)?,
                        policy,
                    })
                }
            })
        };
        let attacker = agent(Role::Attacker)?;
        let defender = agent(Role::Defender)?;
        Ok(Self {
            config: config.clone(),
            seed,
            train_spec,
            eval_spec,
            attacker,
            defender,
            pool: OpponentPool::new(config.hyperparams.pool_max),
            pool_rng: seeding::stream(seed, seeding::POOL),
            pool_draws: 0,
            pool_hits: 0,
            iteration: 0,
            started: Instant::now(),
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn agent(&self, role: Role) -> &Agent {
        match role {
            Role::Attacker => &self.attacker,
            Role::Defender => &self.defender,
        }
    }

    pub fn pool(&self) -> &OpponentPool {
        &self.pool
    }

    /// Bernoulli pool draws made so far and how many of them came up true.
    pub fn pool_draw_counts(&self) -> (u64, u64) {
        (self.pool_draws, self.pool_hits)
    }

    pub fn training_scenario(&self) -> &ScenarioSpec {
        &self.train_spec
    }

    fn is_selfplay(&self) -> bool {
        matches!(self.attacker, Agent::Learning(_)) && matches!(self.defender, Agent::Learning(_))
    }

    fn draw_opponent(&mut self, role: Role) -> Option<Policy> {
        let p = self.config.hyperparams.pool_sample_p;
        let hit = self.pool_rng.random_bool(p);
        self.pool_draws += 1;
        if !hit {
            return None;
        }
        self.pool_hits += 1;
        let snap = self.pool.sample(role, &mut self.pool_rng)?;
        debug_assert!(snap.is_intact(), "pool snapshot was modified after insertion");
        Some(snap.policy.clone())
    }

    /// Runs one iteration: rollout, update of the learning agents, evaluation
    /// of the current policies and, in self-play, pool insertion.
    pub fn step(&mut self) -> anyhow::Result<CurveRow> {
        let it = self.iteration + 1;
        let hp = self.config.hyperparams.clone();
        let selfplay = self.is_selfplay();

        let (def_opponent, att_opponent) = if selfplay {
            (self.draw_opponent(Role::Defender), self.draw_opponent(Role::Attacker))
        } else {
            (None, None)
        };

        let mut env = seeding::substream(self.seed, seeding::ROLLOUT_ENV, it as u64);
        let mut pol = seeding::substream(self.seed, seeding::ROLLOUT_POLICY, it as u64);
        let options = |att: bool, def: bool| RolloutOptions {
            record_attacker: att,
            record_defender: def,
            permute_each_episode: self.config.permute == Permute::Episode,
            batch_size: hp.batch_size,
            max_rounds: hp.max_rounds,
        };
        let learn_att = matches!(self.attacker, Agent::Learning(_));
        let learn_def = matches!(self.defender, Agent::Learning(_));
        let (att_batch, def_batch) = if def_opponent.is_none() && att_opponent.is_none() {
            let r = collect_rollout(
                &self.train_spec,
                self.attacker.policy(),
                self.defender.policy(),
                &options(learn_att, learn_def),
                &mut env,
                &mut pol,
            )
            .context("rollout failed")?;
            (r.attacker, r.defender)
        } else {
            let def_policy = def_opponent.as_ref().unwrap_or(self.defender.policy());
            let a = collect_rollout(
                &self.train_spec,
                self.attacker.policy(),
                def_policy,
                &options(true, false),
                &mut env,
                &mut pol,
            )
            .context("attacker rollout failed")?;
            let att_policy = att_opponent.as_ref().unwrap_or(self.attacker.policy());
            let d = collect_rollout(
                &self.train_spec,
                att_policy,
                self.defender.policy(),
                &options(false, true),
                &mut env,
                &mut pol,
            )
            .context("defender rollout failed")?;
            (a.attacker, d.defender)
        };

        let att_report = update_agent(&mut self.attacker, att_batch, &hp, Role::Attacker, it);
        let def_report = update_agent(&mut self.defender, def_batch, &hp, Role::Defender, it);

        let tally = evaluate_seeded(
            &self.eval_spec,
            self.attacker.policy(),
            self.defender.policy(),
            self.config.eval_games,
            hp.max_rounds,
            self.seed,
            it,
        )?;

        if selfplay && it.is_multiple_of(hp.pool_increment_iters) {
            self.pool.insert(Role::Attacker, it, self.attacker.policy());
            self.pool.insert(Role::Defender, it, self.defender.policy());
        }
        self.iteration = it;

        let losses = |r: Option<UpdateReport>| match r {
            Some(r) => (r.policy_loss, r.value_loss, r.entropy),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        let (apl, avl, ae) = losses(att_report);
        let (dpl, dvl, de) = losses(def_report);
        Ok(CurveRow {
            iteration: it,
            attacker_win_ratio: tally.attacker_win_ratio(),
            defender_win_ratio: tally.defender_win_ratio(),
            draw_ratio: tally.draw_ratio(),
            mean_episode_len: tally.mean_length(),
            attacker_policy_loss: apl,
            attacker_value_loss: avl,
            attacker_entropy: ae,
            defender_policy_loss: dpl,
            defender_value_loss: dvl,
            defender_entropy: de,
            wallclock_s: if self.config.wallclock {
                self.started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        })
    }
}

fn update_agent(
    agent: &mut Agent,
    batch: Option<idsgame_core::RolloutBatch>,
    hp: &idsgame_core::Hyperparams,
    role: Role,
    iteration: usize,
) -> Option<UpdateReport> {
    let learner = agent.learner_mut()?;
    let batch = batch?;
    match update_policy(&mut learner.policy, &mut learner.optimizer, &batch, hp, learner.algo) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("{role:?} update failed at iteration {iteration}, keeping previous parameters: {e}");
            None
        }
    }
}

/// Trains one agent against the static heuristic for `config.iterations` iterations.
pub fn train_vs_static(
    config: &ExperimentConfig,
    spec: &ScenarioSpec,
    seed: u64,
) -> anyhow::Result<Vec<CurveRow>> {
    if config.static_role.role().is_none() {
        bail!("training against a static opponent needs static_role attacker or defender");
    }
    run_iterations(&mut Trainer::new(config, spec, seed)?, config.iterations)
}

/// Trains both agents simultaneously for `config.iterations` iterations.
pub fn train_selfplay(
    config: &ExperimentConfig,
    spec: &ScenarioSpec,
    seed: u64,
) -> anyhow::Result<Vec<CurveRow>> {
    if config.static_role.role().is_some() {
        bail!("self-play needs static_role none");
    }
    run_iterations(&mut Trainer::new(config, spec, seed)?, config.iterations)
}

fn run_iterations(trainer: &mut Trainer, iterations: usize) -> anyhow::Result<Vec<CurveRow>> {
    (0..iterations).map(|_| trainer.step()).collect()
}
