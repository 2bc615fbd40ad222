use rand::Rng;
use serde::{Deserialize, Serialize};

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

/// Epsilon-greedy choice over `q_values`. One uniform draw decides whether to
/// explore, so the random stream advances the same way for every epsilon.
pub fn select_action<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    assert!(!q_values.is_empty(), "no actions to choose from");
    let explore: f64 = rng.random();
    if explore < epsilon {
        rng.random_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

/// Linear decay from `start` to `end` over the first `decay_fraction` of
/// training, then constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.02,
            decay_fraction: 0.8,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, episode: usize, total_episodes: usize) -> f64 {
        let horizon = self.decay_fraction * total_episodes as f64;
        if horizon <= 0.0 {
            return self.end;
        }
        let frac = (episode as f64 / horizon).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}
