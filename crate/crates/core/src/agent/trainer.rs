//! Centralized training of one independent DDQN learner per platoon leader
//! under the common reward.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ddqn::{DdqnAgent, TrainConfig};
use super::replay::Experience;
use crate::environment::{delivery_success, EnvConfig, Environment};
use crate::error::Result;
use crate::mdp::{
    build_observation, observation_dim, step_reward, Action, ActionSpace, Fingerprint,
    RewardWeights,
};

/// The learners of every platoon, indexed by platoon.
#[derive(Debug, Clone)]
pub struct MultiAgent {
    pub agents: Vec<DdqnAgent>,
    pub action_space: ActionSpace,
    pub observation_dim: usize,
}

impl MultiAgent {
    pub fn new<R: Rng + ?Sized>(env: &EnvConfig, train: &TrainConfig, rng: &mut R) -> Self {
        let action_space = ActionSpace::for_config(env);
        let observation_dim =
            observation_dim(env.v2n_links, env.platoons, env.members_per_platoon);
        let agents = (0..env.platoons)
            .map(|_| DdqnAgent::new(observation_dim, action_space.size(), train, rng))
            .collect();
        Self {
            agents,
            action_space,
            observation_dim,
        }
    }

    /// Each active agent observes its local state and picks an action.
    /// Returns the joint action and the `(features, flat action)` of every
    /// agent that acted.
    pub fn decide<R: Rng + ?Sized>(
        &self,
        env: &Environment,
        fingerprint: Fingerprint,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<(Vec<Option<Action>>, Vec<Option<(Vec<f64>, usize)>>)> {
        let mut joint = vec![None; self.agents.len()];
        let mut taken = vec![None; self.agents.len()];
        for (n, agent) in self.agents.iter().enumerate() {
            if !env.active()[n] {
                continue;
            }
            let features = build_observation(env, n, fingerprint).features();
            let index = agent.act(&features, epsilon, rng)?;
            joint[n] = Some(self.action_space.decode(index)?);
            taken[n] = Some((features, index));
        }
        Ok((joint, taken))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub epsilon: f64,
    pub total_reward: f64,
    pub steps: usize,
    /// Fraction of V2V links that delivered their payload.
    pub delivery: f64,
    /// Mean batch loss of each agent, `None` before its first update.
    pub losses: Vec<Option<f64>>,
}

/// Runs training episode `episode`: roll out with epsilon-greedy actions,
/// store every agent's transitions, then update every agent and refresh the
/// target networks on schedule.
pub fn train_episode<R: Rng + ?Sized>(
    team: &mut MultiAgent,
    env_config: &EnvConfig,
    weights: &RewardWeights,
    config: &TrainConfig,
    episode: usize,
    rng: &mut R,
) -> Result<EpisodeStats> {
    let epsilon = config.epsilon.value(episode, config.episodes);
    let fingerprint = Fingerprint::new(episode, config.episodes, epsilon);
    let mut env = Environment::reset(env_config.clone(), rng)?;
    let mut total_reward = 0.0;
    let mut steps = 0;

    while !env.is_done() {
        let (joint, taken) = team.decide(&env, fingerprint, epsilon, rng)?;
        let before = env.payload().clone();
        let outcome = env.step(&joint)?;
        let reward = step_reward(&before, &outcome, weights, env_config);
        total_reward += reward;
        steps += 1;
        for (n, acted) in taken.into_iter().enumerate() {
            let Some((state, action)) = acted else {
                continue;
            };
            let next_state = build_observation(&env, n, fingerprint).features();
            team.agents[n].remember(Experience {
                state,
                action,
                reward,
                next_state,
                terminal: outcome.done || !outcome.payload.active[n],
            });
        }
    }

    let mut losses = Vec::with_capacity(team.agents.len());
    for agent in &mut team.agents {
        let mut sum = 0.0;
        let mut count = 0;
        for _ in 0..config.updates_per_episode {
            if let Some(loss) = agent.train_step(config, rng)? {
                sum += loss;
                count += 1;
            }
        }
        losses.push((count > 0).then(|| sum / count as f64));
    }
    if config.target_sync_episodes > 0 && (episode + 1) % config.target_sync_episodes == 0 {
        for agent in &mut team.agents {
            agent.sync_target();
        }
    }

    let flags = delivery_success(env.payload());
    let delivered = flags.iter().flatten().filter(|f| **f).count();
    Ok(EpisodeStats {
        episode,
        epsilon,
        total_reward,
        steps,
        delivery: delivered as f64 / env_config.total_v2v_links() as f64,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_train() -> TrainConfig {
        TrainConfig {
            episodes: 20,
            batch_size: 8,
            target_sync_episodes: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn exploration_episode_bookkeeping() {
        let env = EnvConfig::default();
        let mut cfg = small_train();
        cfg.updates_per_episode = 0;
        cfg.epsilon.end = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut team = MultiAgent::new(&env, &cfg, &mut rng);
        let frozen: Vec<_> = team.agents.iter().map(|a| a.online.clone()).collect();
        let stats = train_episode(&mut team, &env, &RewardWeights::default(), &cfg, 0, &mut rng)
            .unwrap();
        assert!(stats.steps <= env.horizon_steps());
        for (agent, before) in team.agents.iter().zip(&frozen) {
            assert!(agent.buffer.len() <= env.horizon_steps());
            assert!(!agent.buffer.is_empty());
            assert_eq!(&agent.online, before);
        }
        assert!(stats.losses.iter().all(Option::is_none));
    }

    #[test]
    fn training_is_deterministic() {
        let env = EnvConfig::default();
        let cfg = small_train();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut team = MultiAgent::new(&env, &cfg, &mut rng);
            let mut losses = Vec::new();
            for e in 0..cfg.episodes {
                let s = train_episode(&mut team, &env, &RewardWeights::default(), &cfg, e, &mut rng)
                    .unwrap();
                losses.extend(s.losses.into_iter().flatten());
            }
            (team.agents.into_iter().map(|a| a.online).collect::<Vec<_>>(), losses)
        };
        let (a, la) = run();
        let (b, lb) = run();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        assert!(!la.is_empty());
        assert!(la.iter().all(|l| *l >= 0.0));
    }
}
