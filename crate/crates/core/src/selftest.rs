//! Runtime invariant suite shipped with the binary.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{
    select_action, train_episode, Experience, MultiAgent, ReplayBuffer, TrainConfig,
};
use crate::baselines::random_step;
use crate::environment::{EnvConfig, Environment};
use crate::error::Result;
use crate::mdp::{ActionSpace, RewardWeights};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Inner `Err` is a failed check, outer `Err` a check that could not run.
type Outcome = Result<std::result::Result<String, String>>;

fn check(name: &'static str, outcome: Outcome) -> Check {
    match outcome {
        Ok(Ok(detail)) => Check { name, passed: true, detail },
        Ok(Err(detail)) => Check { name, passed: false, detail },
        Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
    }
}

pub fn run(seed: u64) -> Report {
    Report {
        checks: vec![
            check("common reward", common_reward(seed)),
            check("replay fifo", replay_fifo()),
            check("replay uniformity", replay_uniformity(seed)),
            check("epsilon-greedy distribution", epsilon_greedy(seed)),
            check("action bijection", action_bijection()),
            check("payload accounting", payload_accounting(seed)),
        ],
    }
}

/// Every agent stores the same reward for every step it took part in.
/// Agents only drop out, so the first `k` transitions of any agent belong to
/// the first `k` steps.
fn common_reward(seed: u64) -> Outcome {
    let env = EnvConfig {
        payload_bits: 2.0 * 1060.0 * 8.0,
        ..EnvConfig::default()
    };
    let train = TrainConfig {
        episodes: 3,
        updates_per_episode: 0,
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut team = MultiAgent::new(&env, &train, &mut rng);
    let weights = RewardWeights::default();
    let mut steps = 0;
    for episode in 0..train.episodes {
        let before: Vec<usize> = team.agents.iter().map(|a| a.buffer.len()).collect();
        let stats = train_episode(&mut team, &env, &weights, &train, episode, &mut rng)?;
        steps += stats.steps;
        let rewards: Vec<Vec<f64>> = team
            .agents
            .iter()
            .zip(&before)
            .map(|(a, start)| a.buffer.iter().skip(*start).map(|e| e.reward).collect())
            .collect();
        let longest = rewards.iter().map(Vec::len).max().unwrap_or(0);
        if longest != stats.steps {
            return Ok(Err(format!(
                "episode {episode}: {} steps but longest agent history is {longest}",
                stats.steps
            )));
        }
        for (n, own) in rewards.iter().enumerate() {
            for (other_n, other) in rewards.iter().enumerate() {
                for (k, (a, b)) in own.iter().zip(other).enumerate() {
                    if a.to_bits() != b.to_bits() {
                        return Ok(Err(format!(
                            "episode {episode} step {k}: agent {n} got {a}, agent {other_n} got {b}"
                        )));
                    }
                }
            }
        }
        let total: f64 = rewards.iter().max_by_key(|r| r.len()).unwrap().iter().sum();
        if total.to_bits() != stats.total_reward.to_bits() {
            return Ok(Err(format!("episode {episode}: reward sum mismatch")));
        }
    }
    Ok(Ok(format!("{} agents agree over {steps} steps", env.platoons)))
}

fn experience(tag: usize) -> Experience {
    Experience {
        state: vec![tag as f64],
        action: tag,
        reward: 0.0,
        next_state: vec![0.0],
        terminal: false,
    }
}

fn replay_fifo() -> Outcome {
    let mut buffer = ReplayBuffer::new(5);
    for tag in 0..12 {
        buffer.push(experience(tag));
    }
    let held: Vec<usize> = buffer.iter().map(|e| e.action).collect();
    Ok(if held == vec![7, 8, 9, 10, 11] {
        Ok("capacity 5 keeps the 5 newest in order".into())
    } else {
        Err(format!("buffer holds {held:?}"))
    })
}

fn replay_uniformity(seed: u64) -> Outcome {
    let size = 10;
    let mut buffer = ReplayBuffer::new(size);
    for tag in 0..size {
        buffer.push(experience(tag));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; size];
    let draws = 200_000;
    for _ in 0..draws {
        counts[buffer.sample(1, &mut rng)?[0].action] += 1;
    }
    let worst = counts
        .iter()
        .map(|c| (*c as f64 / draws as f64 - 1.0 / size as f64).abs())
        .fold(0.0, f64::max);
    Ok(if worst < 0.005 {
        Ok(format!("max frequency error {worst:.4}"))
    } else {
        Err(format!("frequency error {worst:.4} exceeds 0.005: {counts:?}"))
    })
}

/// The greedy action is picked with probability `1 - eps + eps/|A|`, every
/// other action with `eps/|A|`.
fn epsilon_greedy(seed: u64) -> Outcome {
    let q = [0.5, 2.0, -1.0, 2.0, 0.0, 1.0, 1.5, -3.0];
    let greedy = 1;
    let draws = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for eps in [0.0, 0.25, 0.5, 1.0] {
        let mut counts = vec![0usize; q.len()];
        for _ in 0..draws {
            counts[select_action(&q, eps, &mut rng)] += 1;
        }
        for (a, c) in counts.iter().enumerate() {
            let expected = eps / q.len() as f64 + if a == greedy { 1.0 - eps } else { 0.0 };
            let got = *c as f64 / draws as f64;
            if (got - expected).abs() > 0.005 {
                return Ok(Err(format!(
                    "eps {eps}: action {a} frequency {got:.4}, expected {expected:.4}"
                )));
            }
        }
    }
    Ok(Ok("eps in {0, 0.25, 0.5, 1} within 0.005".into()))
}

fn action_bijection() -> Outcome {
    for sub_bands in 1..=4 {
        for levels in 1..=5 {
            let space = ActionSpace::new(sub_bands, levels);
            let mut seen = vec![false; space.size()];
            for index in 0..space.size() {
                let action = space.decode(index)?;
                if space.encode(action)? != index {
                    return Ok(Err(format!("{index} does not survive a round trip")));
                }
                seen[index] = true;
            }
            if space.decode(space.size()).is_ok() {
                return Ok(Err(format!("index {} accepted", space.size())));
            }
            if !seen.into_iter().all(|s| s) {
                return Ok(Err("encoding is not onto".into()));
            }
        }
    }
    Ok(Ok("all spaces up to 4 x 5".into()))
}

/// Remaining bits follow `max(0, before - rate * dt)` exactly, and delivered
/// bits never exceed the payload.
fn payload_accounting(seed: u64) -> Outcome {
    let config = EnvConfig {
        payload_bits: 4.0 * 1060.0 * 8.0,
        ..EnvConfig::default()
    };
    let dt = config.step_seconds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for _ in 0..20 {
        let mut env = Environment::reset(config.clone(), &mut rng)?;
        while !env.is_done() {
            let before = env.payload().clone();
            let joint = random_step(&env, &mut rng);
            let out = env.step(&joint)?;
            for n in 0..config.platoons {
                for i in 0..config.members_per_platoon {
                    let old = before.remaining_bits[n][i];
                    let new = out.payload.remaining_bits[n][i];
                    let expected = if before.active[n] {
                        (old - out.v2v_rates[n][i] * dt).max(0.0)
                    } else {
                        old
                    };
                    if new.to_bits() != expected.to_bits() || !(0.0..=config.payload_bits).contains(&new) {
                        return Ok(Err(format!("link ({n},{i}): {old} -> {new}, expected {expected}")));
                    }
                    checked += 1;
                }
                let finished = out.payload.remaining_bits[n].iter().all(|b| *b == 0.0);
                if out.payload.active[n] == finished {
                    return Ok(Err(format!("platoon {n} activity flag disagrees with its payload")));
                }
            }
        }
    }
    Ok(Ok(format!("{checked} link updates exact")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let report = run(0);
        for c in &report.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert_eq!(report.checks.len(), 6);
    }
}
