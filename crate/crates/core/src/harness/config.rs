use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::TrainConfig;
use crate::baselines::DEFAULT_SEARCH_CAP;
use crate::environment::{payload_bits_from_bytes, EnvConfig, BYTES_PER_PAYLOAD_UNIT};
use crate::error::{Error, Result};
use crate::mdp::RewardWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Allocator {
    Rl,
    Exhaustive,
    Random,
}

impl Allocator {
    pub const ALL: [Allocator; 3] = [Allocator::Rl, Allocator::Exhaustive, Allocator::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Allocator::Rl => "rl",
            Allocator::Exhaustive => "exhaustive",
            Allocator::Random => "random",
        }
    }
}

impl fmt::Display for Allocator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Allocator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Allocator::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown allocator {s:?}; expected rl, exhaustive or random"
                ))
            })
    }
}

/// Everything one experiment needs. Scalar settings come first so the TOML
/// form keeps them above the nested tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub test_episodes: usize,
    /// Payload every link carries while training.
    pub train_payload_bytes: u64,
    /// Payloads evaluated in the testing phase.
    pub payload_sweep_bytes: Vec<u64>,
    pub allocators: Vec<Allocator>,
    /// Largest joint action space the exhaustive allocator will scan.
    pub search_cap: u64,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub reward: RewardWeights,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("out"),
            test_episodes: 100,
            train_payload_bytes: 8 * BYTES_PER_PAYLOAD_UNIT,
            payload_sweep_bytes: (1..=6).map(|k| 2 * k * BYTES_PER_PAYLOAD_UNIT).collect(),
            allocators: Allocator::ALL.to_vec(),
            search_cap: DEFAULT_SEARCH_CAP,
            env: EnvConfig::default(),
            train: TrainConfig::default(),
            reward: RewardWeights::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        self.env.validate()?;
        if self.test_episodes == 0 {
            return bad("test_episodes must be positive".into());
        }
        let t = &self.train;
        if t.episodes == 0 {
            return bad("train.episodes must be positive".into());
        }
        if t.batch_size == 0 || t.buffer_capacity < t.batch_size {
            return bad("need 0 < train.batch_size <= train.buffer_capacity".into());
        }
        if !(0.0..=1.0).contains(&t.gamma) {
            return bad(format!("train.gamma must lie in [0, 1], got {}", t.gamma));
        }
        if !(t.learning_rate > 0.0) {
            return bad("train.learning_rate must be positive".into());
        }
        if t.hidden_layers.contains(&0) {
            return bad("hidden layers need at least one unit".into());
        }
        if let Some(clip) = t.grad_clip {
            if !(clip > 0.0) {
                return bad("train.grad_clip must be positive".into());
            }
        }
        let e = &t.epsilon;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) {
            return bad("epsilon bounds must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Environment with every link carrying `payload_bytes`.
    pub fn env_for_payload(&self, payload_bytes: u64) -> EnvConfig {
        EnvConfig {
            payload_bits: payload_bits_from_bytes(payload_bytes),
            ..self.env.clone()
        }
    }

    pub fn train_env(&self) -> EnvConfig {
        self.env_for_payload(self.train_payload_bytes)
    }
}
