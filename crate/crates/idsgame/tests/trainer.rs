use idsgame::config::{ExperimentConfig, Permute, ScenarioRef, StaticRole};
use idsgame::formats::policy_hash;
use idsgame::trainer::{choose_opponent, evaluate_seeded, train_selfplay, train_vs_static, OpponentPool, Trainer};
use idsgame_core::rollout::{collect_rollout, RolloutOptions};
use idsgame_core::{build_scenario, Algo, Policy, Role};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny(static_role: StaticRole, scenario: u8) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        scenario: ScenarioRef::Builtin(scenario),
        static_role,
        iterations: 10,
        seeds: vec![0],
        hidden: vec![16],
        eval_games: 10,
        wallclock: false,
        ..ExperimentConfig::default()
    };
    c.hyperparams.batch_size = 60;
    c
}

#[test]
fn rollout_size_zero_sum_and_determinism() {
    let spec = build_scenario(1).unwrap();
    let mut init = ChaCha8Rng::seed_from_u64(9);
    let attacker = idsgame::trainer::new_learning_policy(Algo::PpoAr, Role::Attacker, &spec, &[32], &mut init).unwrap();
    let defender = idsgame::trainer::new_learning_policy(Algo::Ppo, Role::Defender, &spec, &[32], &mut init).unwrap();
    let opts = RolloutOptions {
        record_attacker: true,
        record_defender: true,
        permute_each_episode: false,
        batch_size: 2000,
        max_rounds: 100,
    };
    let collect = || {
        collect_rollout(
            &spec,
            &attacker,
            &defender,
            &opts,
            &mut ChaCha8Rng::seed_from_u64(1),
            &mut ChaCha8Rng::seed_from_u64(2),
        )
        .unwrap()
    };
    let r = collect();
    let (a, d) = (r.attacker.as_ref().unwrap(), r.defender.as_ref().unwrap());
    assert!((2000..=2000 + 100 - 1).contains(&a.len()), "{} steps", a.len());
    assert_eq!(a.len(), d.len());
    for i in 0..a.len() {
        assert_eq!(a.rewards[i], -d.rewards[i]);
        assert_eq!(a.dones[i], d.dones[i]);
    }
    assert_eq!(r, collect());
}

#[test]
fn static_defender_never_changes() {
    let config = tiny(StaticRole::Defender, 3);
    let spec = build_scenario(3).unwrap();
    let mut trainer = Trainer::new(&config, &spec, 4).unwrap();
    let static_hash = policy_hash(trainer.agent(Role::Defender).policy());
    let start = trainer.agent(Role::Attacker).policy().clone();
    for _ in 0..5 {
        trainer.step().unwrap();
        assert_eq!(policy_hash(trainer.agent(Role::Defender).policy()), static_hash);
        assert_eq!(trainer.agent(Role::Defender).policy(), &Policy::DefendMinimal);
    }
    assert_ne!(trainer.agent(Role::Attacker).policy(), &start);
}

#[test]
fn curve_has_one_row_per_iteration_and_partitions() {
    let config = tiny(StaticRole::Attacker, 1);
    let rows = train_vs_static(&config, &build_scenario(1).unwrap(), 0).unwrap();
    assert_eq!(rows.len(), 10);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.iteration, i + 1);
        assert!((r.attacker_win_ratio + r.defender_win_ratio + r.draw_ratio - 1.0).abs() < 1e-9);
        assert!(r.attacker_entropy.is_nan() && r.defender_entropy.is_finite());
    }
    assert!(train_selfplay(&config, &build_scenario(1).unwrap(), 0).is_err());
}

#[test]
fn pool_gets_two_frozen_snapshots_per_increment() {
    let mut config = tiny(StaticRole::None, 2);
    config.hidden = vec![8];
    config.hyperparams.batch_size = 10;
    config.eval_games = 1;
    let spec = build_scenario(2).unwrap();
    let mut trainer = Trainer::new(&config, &spec, 1).unwrap();
    for it in 1..=150 {
        trainer.step().unwrap();
        assert_eq!(trainer.pool().len(), 2 * (it / 50));
    }
    let roles: Vec<(Role, usize)> = trainer.pool().snapshots().map(|s| (s.role, s.iteration)).collect();
    assert_eq!(
        roles,
        vec![
            (Role::Attacker, 50),
            (Role::Defender, 50),
            (Role::Attacker, 100),
            (Role::Defender, 100),
            (Role::Attacker, 150),
            (Role::Defender, 150)
        ]
    );
    assert!(trainer.pool().snapshots().all(|s| s.is_intact()));
    let first = trainer.pool().snapshots().next().unwrap().policy.clone();
    assert_ne!(&first, trainer.agent(Role::Attacker).policy());
    let (draws, hits) = trainer.pool_draw_counts();
    assert_eq!(draws, 300);
    assert!(hits > 0 && hits < draws);
}

#[test]
fn pool_draw_frequency_matches_sample_p() {
    let mut pool = OpponentPool::new(100_000);
    pool.insert(Role::Defender, 50, &Policy::Random);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 10_000;
    let hits = (0..n)
        .filter(|_| choose_opponent(&pool, Role::Defender, 0.5, &mut rng).is_some())
        .count() as f64;
    let sigma = (n as f64 * 0.25).sqrt();
    assert!((hits - 5000.0).abs() <= 3.0 * sigma, "{hits} pool draws");
}

#[test]
fn zero_sample_p_matches_self_play_without_pool() {
    let mut a = tiny(StaticRole::None, 2);
    a.iterations = 12;
    a.hyperparams.pool_increment_iters = 3;
    a.hyperparams.pool_sample_p = 0.0;
    let mut b = a.clone();
    b.hyperparams.pool_increment_iters = usize::MAX;
    b.hyperparams.pool_sample_p = 0.5;
    let spec = build_scenario(2).unwrap();
    let ra = train_selfplay(&a, &spec, 3).unwrap();
    let rb = train_selfplay(&b, &spec, 3).unwrap();
    let bits = |rows: &[idsgame::formats::CurveRow]| -> Vec<u64> {
        rows.iter()
            .flat_map(|r| [r.attacker_win_ratio, r.attacker_policy_loss, r.defender_value_loss, r.defender_entropy])
            .map(f64::to_bits)
            .collect()
    };
    assert_eq!(bits(&ra), bits(&rb));
}

#[test]
fn per_episode_permutation_trains() {
    let mut c = tiny(StaticRole::Defender, 1);
    c.permute = Permute::Episode;
    c.iterations = 3;
    let rows = train_vs_static(&c, &build_scenario(1).unwrap(), 0).unwrap();
    assert_eq!(rows.len(), 3);
}

#[test]
fn evaluation_partitions_and_repeats() {
    let spec = build_scenario(3).unwrap();
    let run = || evaluate_seeded(&spec, &Policy::AttackMaximal, &Policy::DefendMinimal, 100, 100, 5, 0).unwrap();
    let t = run();
    assert_eq!(t.attacker_wins + t.defender_wins + t.draws, 100);
    assert_eq!(t, run());
}

#[test]
fn weak_defenses_favor_the_random_attacker() {
    let games = 10_000;
    let ratio = |id| {
        evaluate_seeded(&build_scenario(id).unwrap(), &Policy::Random, &Policy::Random, games, 100, 11, 0)
            .unwrap()
            .attacker_win_ratio()
    };
    let (s1, s3) = (ratio(1), ratio(3));
    assert!(s1 < s3, "scenario 1: {s1}, scenario 3: {s3}");
}
