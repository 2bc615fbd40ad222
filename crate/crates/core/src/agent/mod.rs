//! Per-platoon double deep Q-learning.

pub mod checkpoint;
pub mod ddqn;
pub mod network;
pub mod optim;
pub mod policy;
pub mod replay;
pub mod trainer;

pub use checkpoint::{checkpoint_path, Checkpoint, ConfigFingerprint};
pub use ddqn::{double_q_target, DdqnAgent, TrainConfig};
pub use network::{Dense, QNetwork, QSample};
pub use optim::RmsProp;
pub use policy::{argmax, select_action, EpsilonSchedule};
pub use replay::{Experience, ReplayBuffer};
pub use trainer::{train_episode, EpisodeStats, MultiAgent};
