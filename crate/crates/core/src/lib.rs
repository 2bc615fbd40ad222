//! Platoon-based C-V2X spectrum sharing: a single-cell system-level
//! simulator, per-platoon double DQN resource allocation, centralized
//! baselines and the experiment harness that ties them together.

pub mod agent;
pub mod baselines;
pub mod channel;
pub mod environment;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod selftest;
pub mod units;

pub use agent::{DdqnAgent, MultiAgent, QNetwork, TrainConfig};
pub use channel::{Geometry, LinkGains, Position, Topology};
pub use environment::{EnvConfig, Environment, StepOutcome};
pub use error::{Error, Result};
pub use harness::{Allocator, ExperimentConfig, MetricsRecord};
pub use mdp::{Action, ActionSpace, Observation, RewardWeights};
