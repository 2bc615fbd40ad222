//! Versioned JSON checkpoint of one agent. Floats are written in shortest
//! round-trip form and parsed exactly, so save then load reproduces the
//! network bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ddqn::{DdqnAgent, TrainConfig};
use super::network::QNetwork;
use super::optim::RmsProp;
use crate::environment::EnvConfig;
use crate::error::{Error, Result};
use crate::mdp::ActionSpace;

pub const CHECKPOINT_FORMAT: &str = "v2x-ddqn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Environment dimensions a checkpoint was trained for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigFingerprint {
    pub v2n_links: usize,
    pub platoons: usize,
    pub members_per_platoon: usize,
    pub power_levels: usize,
    pub train_episodes: usize,
}

impl ConfigFingerprint {
    pub fn new(env: &EnvConfig, train: &TrainConfig) -> Self {
        Self {
            v2n_links: env.v2n_links,
            platoons: env.platoons,
            members_per_platoon: env.members_per_platoon,
            power_levels: env.power_levels_dbm.len(),
            train_episodes: train.episodes,
        }
    }

    /// True when the checkpoint can drive an environment with this config.
    pub fn compatible_with(&self, env: &EnvConfig) -> bool {
        self.v2n_links == env.v2n_links
            && self.platoons == env.platoons
            && self.members_per_platoon == env.members_per_platoon
            && self.power_levels == env.power_levels_dbm.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub agent: usize,
    pub action_space: ActionSpace,
    pub layer_sizes: Vec<usize>,
    pub fingerprint: ConfigFingerprint,
    pub online: QNetwork,
    pub target: QNetwork,
    pub optimizer: RmsProp,
}

impl Checkpoint {
    pub fn capture(agent_index: usize, agent: &DdqnAgent, action_space: ActionSpace, fingerprint: ConfigFingerprint) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            agent: agent_index,
            action_space,
            layer_sizes: agent.online.sizes(),
            fingerprint,
            online: agent.online.clone(),
            target: agent.target.clone(),
            optimizer: agent.optimizer.clone(),
        }
    }

    /// Rebuilds an agent with an empty replay memory.
    pub fn restore(&self, train: &TrainConfig) -> DdqnAgent {
        let mut agent = DdqnAgent::from_network(self.online.clone(), train);
        agent.target = self.target.clone();
        agent.optimizer = self.optimizer.clone();
        agent
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingCheckpoint(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::BadCheckpoint {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        ckpt.check(path)?;
        Ok(ckpt)
    }

    fn check(&self, path: &Path) -> Result<()> {
        let bad = |reason: String| Error::BadCheckpoint {
            path: path.to_path_buf(),
            reason,
        };
        if self.format != CHECKPOINT_FORMAT {
            return Err(bad(format!("unknown format {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {}", self.version)));
        }
        if self.online.sizes() != self.layer_sizes || self.target.sizes() != self.layer_sizes {
            return Err(bad("layer sizes disagree with stored networks".into()));
        }
        if self.online.output_dim() != self.action_space.size() {
            return Err(bad("output width disagrees with the action space".into()));
        }
        if !self.online.all_finite() || !self.target.all_finite() {
            return Err(bad("non-finite parameters".into()));
        }
        Ok(())
    }
}

/// `<dir>/agent_<n>.ckpt`
pub fn checkpoint_path(dir: &Path, agent: usize) -> PathBuf {
    dir.join(format!("agent_{agent}.ckpt"))
}
