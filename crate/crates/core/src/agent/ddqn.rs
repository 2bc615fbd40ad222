use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{QNetwork, QSample};
use super::optim::RmsProp;
use super::policy::{argmax, select_action, EpsilonSchedule};
use super::replay::{Experience, ReplayBuffer};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_eps: f64,
    pub hidden_layers: Vec<usize>,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Target networks are refreshed every this many episodes.
    pub target_sync_episodes: usize,
    /// Mini-batch updates applied by every agent at the end of an episode.
    pub updates_per_episode: usize,
    pub epsilon: EpsilonSchedule,
    /// Rescales a gradient whose L2 norm exceeds this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            gamma: 0.95,
            learning_rate: 0.001,
            rmsprop_decay: 0.9,
            rmsprop_eps: 1e-8,
            hidden_layers: vec![100, 50, 24],
            batch_size: 64,
            buffer_capacity: 50_000,
            target_sync_episodes: 100,
            updates_per_episode: 4,
            epsilon: EpsilonSchedule::default(),
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn layer_sizes(&self, inputs: usize, actions: usize) -> Vec<usize> {
        let mut sizes = vec![inputs];
        sizes.extend(&self.hidden_layers);
        sizes.push(actions);
        sizes
    }
}

/// Double-DQN bootstrap target: the online network picks the next action,
/// the target network scores it.
pub fn double_q_target(
    online: &QNetwork,
    target: &QNetwork,
    exp: &Experience,
    gamma: f64,
) -> Result<f64> {
    if exp.terminal {
        return Ok(exp.reward);
    }
    let next_action = argmax(&online.forward(&exp.next_state)?);
    let next_value = target.forward(&exp.next_state)?[next_action];
    Ok(exp.reward + gamma * next_value)
}

/// One learner: online and target networks, optimizer and replay memory.
#[derive(Debug, Clone)]
pub struct DdqnAgent {
    pub online: QNetwork,
    pub target: QNetwork,
    pub optimizer: RmsProp,
    pub buffer: ReplayBuffer,
}

impl DdqnAgent {
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        actions: usize,
        config: &TrainConfig,
        rng: &mut R,
    ) -> Self {
        let online = QNetwork::init(&config.layer_sizes(inputs, actions), rng);
        Self::from_network(online, config)
    }

    pub fn from_network(online: QNetwork, config: &TrainConfig) -> Self {
        let optimizer = RmsProp::new(
            &online,
            config.learning_rate,
            config.rmsprop_decay,
            config.rmsprop_eps,
        );
        Self {
            target: online.clone(),
            online,
            optimizer,
            buffer: ReplayBuffer::new(config.buffer_capacity),
        }
    }

    pub fn q_values(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.online.forward(features)
    }

    pub fn act<R: Rng + ?Sized>(&self, features: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
        Ok(select_action(&self.q_values(features)?, epsilon, rng))
    }

    pub fn remember(&mut self, exp: Experience) {
        self.buffer.push(exp);
    }

    /// One RMSProp step on a uniformly sampled mini-batch. Returns the batch
    /// loss, or `None` while the buffer is smaller than the batch.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        config: &TrainConfig,
        rng: &mut R,
    ) -> Result<Option<f64>> {
        if self.buffer.len() < config.batch_size {
            return Ok(None);
        }
        let batch = self.buffer.sample(config.batch_size, rng)?;
        let mut targets = Vec::with_capacity(batch.len());
        for exp in &batch {
            targets.push(double_q_target(&self.online, &self.target, exp, config.gamma)?);
        }
        let samples: Vec<QSample> = batch
            .iter()
            .zip(&targets)
            .map(|(e, y)| (e.state.as_slice(), e.action, *y))
            .collect();
        let (mut grad, loss) = self.online.mse_gradient(&samples)?;
        if let Some(limit) = config.grad_clip {
            let norm = grad.l2_norm();
            if norm > limit {
                grad.scale(limit / norm);
            }
        }
        self.optimizer.step(&mut self.online, &grad);
        Ok(Some(loss))
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }
}
