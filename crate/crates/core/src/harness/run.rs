use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Allocator, ExperimentConfig};
use super::metrics::{compute_metrics, EpisodeOutcome, MetricsRecord};
use super::seeds;
use crate::agent::{
    checkpoint_path, train_episode, Checkpoint, ConfigFingerprint, EpisodeStats, MultiAgent,
};
use crate::baselines::{exhaustive_step, random_step};
use crate::environment::{delivery_success, EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::mdp::{Action, Fingerprint};

pub const TRAINING_LOG: &str = "train_log.jsonl";

/// Chooses a joint action for the current step.
pub trait Policy {
    fn act(&mut self, env: &Environment) -> Result<Vec<Option<Action>>>;
}

/// Trained agents acting greedily on local observations.
pub struct GreedyTeam<'a> {
    team: &'a MultiAgent,
    fingerprint: Fingerprint,
    rng: ChaCha8Rng,
}

impl<'a> GreedyTeam<'a> {
    /// The fingerprint is frozen at the last training episode with no
    /// exploration.
    pub fn new(team: &'a MultiAgent, train_episodes: usize, rng: ChaCha8Rng) -> Self {
        Self {
            team,
            fingerprint: Fingerprint::new(train_episodes.saturating_sub(1), train_episodes, 0.0),
            rng,
        }
    }
}

impl Policy for GreedyTeam<'_> {
    fn act(&mut self, env: &Environment) -> Result<Vec<Option<Action>>> {
        Ok(self.team.decide(env, self.fingerprint, 0.0, &mut self.rng)?.0)
    }
}

pub struct Exhaustive {
    pub cap: u64,
}

impl Policy for Exhaustive {
    fn act(&mut self, env: &Environment) -> Result<Vec<Option<Action>>> {
        exhaustive_step(env, self.cap)
    }
}

pub struct Random<R> {
    pub rng: R,
}

impl<R: Rng> Policy for Random<R> {
    fn act(&mut self, env: &Environment) -> Result<Vec<Option<Action>>> {
        Ok(random_step(env, &mut self.rng))
    }
}

/// Plays one test episode. V2N rates are accounted over the whole latency
/// window: once every platoon has finished, the remaining blocks are
/// interference-free.
pub fn run_episode<R: Rng + ?Sized>(
    config: &EnvConfig,
    drop_rng: &mut R,
    policy: &mut dyn Policy,
) -> Result<EpisodeOutcome> {
    let mut env = Environment::reset(config.clone(), drop_rng)?;
    let mut rate_sum = 0.0;
    let mut bound_sum = 0.0;
    let mut samples = 0;
    while env.payload().steps_elapsed < config.horizon_steps() {
        let rates = if env.is_done() {
            let rates = env.advance_idle()?;
            bound_sum += rates.iter().sum::<f64>();
            rates
        } else {
            bound_sum += env.interference_free_v2n_rates().iter().sum::<f64>();
            let joint = policy.act(&env)?;
            env.step(&joint)?.v2n_rates
        };
        rate_sum += rates.iter().sum::<f64>();
        samples += rates.len();
    }
    if rate_sum > bound_sum * (1.0 + 1e-12) {
        return Err(Error::Invariant(format!(
            "episode V2N rate sum {rate_sum} exceeds the interference-free bound {bound_sum}"
        )));
    }
    let flags = delivery_success(env.payload());
    Ok(EpisodeOutcome {
        v2n_rate_sum: rate_sum,
        v2n_samples: samples,
        delivered_links: flags.iter().flatten().filter(|f| **f).count(),
        total_links: config.total_v2v_links(),
    })
}

/// Trained agents and the per-episode training log.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub team: MultiAgent,
    pub log: Vec<EpisodeStats>,
}

/// Centralized training at the training payload. `progress` sees every
/// finished episode.
pub fn run_training(
    config: &ExperimentConfig,
    mut progress: impl FnMut(&EpisodeStats),
) -> Result<TrainingRun> {
    config.validate()?;
    let env = config.train_env();
    let mut rng = seeds::stream(config.seed, &[seeds::TRAINING]);
    let mut team = MultiAgent::new(&env, &config.train, &mut rng);
    let mut log = Vec::with_capacity(config.train.episodes);
    for episode in 0..config.train.episodes {
        let stats = train_episode(&mut team, &env, &config.reward, &config.train, episode, &mut rng)?;
        progress(&stats);
        log.push(stats);
    }
    Ok(TrainingRun { team, log })
}

impl TrainingRun {
    /// Writes `agent_<n>.ckpt` for every agent and the JSON-lines log.
    pub fn save(&self, config: &ExperimentConfig, dir: &Path) -> Result<()> {
        save_team(&self.team, config, dir)?;
        let path = dir.join(TRAINING_LOG);
        let mut out = Vec::new();
        for stats in &self.log {
            serde_json::to_writer(&mut out, stats)?;
            out.push(b'\n');
        }
        fs::File::create(&path)
            .and_then(|mut f| f.write_all(&out))
            .map_err(|e| Error::io(&path, e))
    }
}

pub fn save_team(team: &MultiAgent, config: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let fingerprint = ConfigFingerprint::new(&config.env, &config.train);
    for (n, agent) in team.agents.iter().enumerate() {
        Checkpoint::capture(n, agent, team.action_space, fingerprint.clone())
            .save(&checkpoint_path(dir, n))?;
    }
    Ok(())
}

/// Loads one checkpoint per platoon and checks it fits the configured
/// environment.
pub fn load_team(config: &ExperimentConfig, dir: &Path) -> Result<MultiAgent> {
    let mut agents = Vec::with_capacity(config.env.platoons);
    let mut action_space = None;
    let mut observation_dim = 0;
    for n in 0..config.env.platoons {
        let path = checkpoint_path(dir, n);
        let ckpt = Checkpoint::load(&path)?;
        if !ckpt.fingerprint.compatible_with(&config.env) {
            let f = &ckpt.fingerprint;
            return Err(Error::InvalidConfig(format!(
                "{} was trained for M={}, N={}, {} members, {} power levels; \
                 the config has M={}, N={}, {} members, {} power levels",
                path.display(),
                f.v2n_links,
                f.platoons,
                f.members_per_platoon,
                f.power_levels,
                config.env.v2n_links,
                config.env.platoons,
                config.env.members_per_platoon,
                config.env.power_levels_dbm.len(),
            )));
        }
        action_space = Some(ckpt.action_space);
        observation_dim = ckpt.online.input_dim();
        agents.push(ckpt.restore(&config.train));
    }
    let action_space = action_space
        .ok_or_else(|| Error::InvalidConfig("no platoons configured".into()))?;
    Ok(MultiAgent {
        agents,
        action_space,
        observation_dim,
    })
}

/// Scores one allocator at one payload over the configured test episodes.
pub fn evaluate_point(
    config: &ExperimentConfig,
    team: Option<&MultiAgent>,
    allocator: Allocator,
    payload_bytes: u64,
) -> Result<MetricsRecord> {
    let env = config.env_for_payload(payload_bytes);
    let mut policy: Box<dyn Policy + '_> = match allocator {
        Allocator::Rl => {
            let team = team.ok_or_else(|| {
                Error::InvalidConfig("the rl allocator needs trained agents".into())
            })?;
            let rng = seeds::stream(config.seed, &[seeds::GREEDY_POLICY, payload_bytes]);
            Box::new(GreedyTeam::new(team, config.train.episodes, rng))
        }
        Allocator::Exhaustive => Box::new(Exhaustive {
            cap: config.search_cap,
        }),
        Allocator::Random => Box::new(Random {
            rng: seeds::stream(config.seed, &[seeds::RANDOM_POLICY, payload_bytes]),
        }),
    };
    let outcomes = (0..config.test_episodes)
        .map(|k| {
            let mut drop_rng = seeds::stream(config.seed, &[seeds::TEST_EPISODE, k as u64]);
            run_episode(&env, &mut drop_rng, policy.as_mut())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(compute_metrics(
        payload_bytes,
        config.env.v2n_links,
        allocator,
        config.seed,
        &outcomes,
    ))
}

/// One record per (payload, allocator), payload-major in configuration
/// order. Points run in parallel; each draws from its own derived streams,
/// so the output does not depend on scheduling.
pub fn run_evaluation(
    config: &ExperimentConfig,
    team: Option<&MultiAgent>,
    progress: &(dyn Fn(&MetricsRecord) + Sync),
) -> Result<Vec<MetricsRecord>> {
    config.validate()?;
    if config.allocators.contains(&Allocator::Rl) && team.is_none() {
        return Err(Error::InvalidConfig("the rl allocator needs trained agents".into()));
    }
    let points: Vec<(u64, Allocator)> = config
        .payload_sweep_bytes
        .iter()
        .flat_map(|b| config.allocators.iter().map(move |a| (*b, *a)))
        .collect();
    points
        .par_iter()
        .map(|(bytes, allocator)| {
            let record = evaluate_point(config, team, *allocator, *bytes)?;
            progress(&record);
            Ok(record)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::TrainConfig;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            test_episodes: 3,
            payload_sweep_bytes: vec![2120, 8480],
            train: TrainConfig {
                episodes: 4,
                batch_size: 8,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn episode_covers_whole_window() {
        let cfg = tiny();
        let env = cfg.env_for_payload(2120);
        let mut rng = seeds::stream(0, &[]);
        let outcome = run_episode(&env, &mut rng, &mut Exhaustive { cap: 1 << 20 }).unwrap();
        assert_eq!(outcome.v2n_samples, env.horizon_steps() * env.v2n_links);
        assert_eq!(outcome.total_links, 12);
    }

    #[test]
    fn empty_sweep_gives_no_records() {
        let cfg = ExperimentConfig {
            payload_sweep_bytes: vec![],
            allocators: vec![Allocator::Random],
            ..tiny()
        };
        assert!(run_evaluation(&cfg, None, &|_| {}).unwrap().is_empty());
    }

    #[test]
    fn rl_without_agents_is_rejected() {
        let cfg = tiny();
        assert!(matches!(
            run_evaluation(&cfg, None, &|_| {}),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn record_order_and_values() {
        let cfg = tiny();
        let run = run_training(&cfg, |_| {}).unwrap();
        assert_eq!(run.log.len(), 4);
        let records = run_evaluation(&cfg, Some(&run.team), &|_| {}).unwrap();
        let keys: Vec<_> = records.iter().map(|r| (r.payload_bytes, r.allocator)).collect();
        assert_eq!(
            keys,
            vec![
                (2120, Allocator::Rl),
                (2120, Allocator::Exhaustive),
                (2120, Allocator::Random),
                (8480, Allocator::Rl),
                (8480, Allocator::Exhaustive),
                (8480, Allocator::Random),
            ]
        );
        for r in &records {
            assert!((0.0..=1.0).contains(&r.delivery_probability));
            assert!(r.avg_v2n_rate > 0.0);
            assert_eq!(r.episodes, 3);
        }
    }
}
