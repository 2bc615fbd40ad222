use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use v2x_core::agent::{checkpoint_path, EpisodeStats, TrainConfig};
use v2x_core::harness::{
    evaluate_point, load_team, run_evaluation, run_training, Allocator, ExperimentConfig,
    TRAINING_LOG,
};
use v2x_core::mdp::{build_observation, Fingerprint};
use v2x_core::{Environment, Error};

fn quick(episodes: usize) -> ExperimentConfig {
    ExperimentConfig {
        test_episodes: 5,
        payload_sweep_bytes: vec![2120, 6360],
        train: TrainConfig {
            episodes,
            batch_size: 16,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

fn read_log(dir: &Path) -> Vec<EpisodeStats> {
    fs::read_to_string(dir.join(TRAINING_LOG))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn shipped_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    assert_eq!(ExperimentConfig::load(&path).unwrap(), ExperimentConfig::default());
}

#[test]
fn smoke_training_produces_loadable_checkpoints() {
    let config = quick(1);
    let dir = tempfile::tempdir().unwrap();
    let run = run_training(&config, |_| {}).unwrap();
    run.save(&config, dir.path()).unwrap();
    assert_eq!(read_log(dir.path()), run.log);
    assert_eq!(run.log.len(), 1);

    let team = load_team(&config, dir.path()).unwrap();
    let env = Environment::reset(config.train_env(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    for (n, (loaded, trained)) in team.agents.iter().zip(&run.team.agents).enumerate() {
        let x = build_observation(&env, n, Fingerprint::new(0, 1, 0.0)).features();
        assert_eq!(loaded.q_values(&x).unwrap(), trained.q_values(&x).unwrap());
    }
}

#[test]
fn same_seed_same_checkpoints() {
    let config = quick(30);
    let save = || {
        let dir = tempfile::tempdir().unwrap();
        run_training(&config, |_| {}).unwrap().save(&config, dir.path()).unwrap();
        (0..config.env.platoons)
            .map(|n| fs::read(checkpoint_path(dir.path(), n)).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(save(), save());
}

#[test]
fn default_schedule_log_has_decreasing_epsilon() {
    let mut config = ExperimentConfig::default();
    config.train.updates_per_episode = 0;
    let run = run_training(&config, |_| {}).unwrap();
    assert_eq!(run.log.len(), 2000);
    assert_eq!(run.log[0].epsilon, 1.0);
    assert!(run.log.windows(2).all(|w| w[1].epsilon <= w[0].epsilon));
    assert!((run.log[1999].epsilon - 0.02).abs() < 1e-12);
}

#[test]
fn random_evaluation_is_bit_reproducible() {
    let config = quick(1);
    let a = evaluate_point(&config, None, Allocator::Random, 4240).unwrap();
    let b = evaluate_point(&config, None, Allocator::Random, 4240).unwrap();
    assert_eq!(a.avg_v2n_rate.to_bits(), b.avg_v2n_rate.to_bits());
    assert_eq!(a, b);
}

#[test]
fn exhaustive_delivers_small_payloads_and_dominates_random() {
    let config = ExperimentConfig {
        test_episodes: 100,
        payload_sweep_bytes: vec![2120, 4240, 6360, 8480, 10600, 12720],
        allocators: vec![Allocator::Exhaustive, Allocator::Random],
        env: v2x_core::EnvConfig {
            v2n_links: 1,
            ..Default::default()
        },
        ..ExperimentConfig::default()
    };
    let records = run_evaluation(&config, None, &|_| {}).unwrap();
    assert!((records[0].delivery_probability - 1.0).abs() <= 0.01);
    for pair in records.chunks(2) {
        let (exhaustive, random) = (&pair[0], &pair[1]);
        assert_eq!(exhaustive.allocator, Allocator::Exhaustive);
        assert!(random.delivery_probability <= exhaustive.delivery_probability);
    }
}

#[test]
fn checkpoint_problems_are_reported() {
    let config = quick(1);
    let dir = tempfile::tempdir().unwrap();
    match load_team(&config, dir.path()) {
        Err(Error::MissingCheckpoint(path)) => assert_eq!(path, checkpoint_path(dir.path(), 0)),
        other => panic!("unexpected {other:?}"),
    }

    run_training(&config, |_| {}).unwrap().save(&config, dir.path()).unwrap();
    let mut other = config.clone();
    other.env.v2n_links = 1;
    assert!(matches!(load_team(&other, dir.path()), Err(Error::InvalidConfig(_))));

    fs::write(checkpoint_path(dir.path(), 3), "{ not json").unwrap();
    assert!(matches!(load_team(&config, dir.path()), Err(Error::BadCheckpoint { .. })));
}

#[test]
fn unwritable_output_is_an_error() {
    let config = quick(1);
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let run = run_training(&config, |_| {}).unwrap();
    assert!(matches!(run.save(&config, &blocker.join("out")), Err(Error::Io { .. })));
}
