use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity FIFO replay memory.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Experience>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(4096)),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, exp: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(exp);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// Uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<&Experience>> {
        if k == 0 || self.items.len() < k {
            return Err(Error::InsufficientExperience {
                len: self.items.len(),
                requested: k,
            });
        }
        Ok((0..k)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp(tag: usize) -> Experience {
        Experience {
            state: vec![tag as f64],
            action: tag,
            reward: 0.0,
            next_state: vec![],
            terminal: false,
        }
    }

    #[test]
    fn evicts_oldest() {
        let mut buf = ReplayBuffer::new(2);
        for k in 0..3 {
            buf.push(exp(k));
        }
        let tags: Vec<usize> = buf.iter().map(|e| e.action).collect();
        assert_eq!(tags, vec![1, 2]);
    }

    #[test]
    fn single_item_sample() {
        let mut buf = ReplayBuffer::new(4);
        buf.push(exp(9));
        let s = buf.sample(1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s[0].action, 9);
        assert!(matches!(
            buf.sample(2, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::InsufficientExperience { len: 1, requested: 2 })
        ));
    }

    #[test]
    fn uniform_draws() {
        let mut buf = ReplayBuffer::new(100);
        for k in 0..100 {
            buf.push(exp(k));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 100];
        let draws = 100_000;
        for _ in 0..draws {
            counts[buf.sample(1, &mut rng).unwrap()[0].action] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.01).abs() < 0.003);
        }
    }
}
