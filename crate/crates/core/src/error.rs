use std::path::PathBuf;

/// Errors produced by the simulator, the learners and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),

    #[error("episode is finished; reset before stepping")]
    EpisodeFinished,

    #[error("idle advance requires every platoon to have finished")]
    PlatoonsActive,

    #[error("platoon {0} is active but has no action")]
    MissingAction(usize),

    #[error("action index {index} out of range for an action space of {size}")]
    ActionOutOfRange { index: usize, size: usize },

    #[error("input has {got} features but the network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("replay buffer holds {len} experiences, cannot sample {requested}")]
    InsufficientExperience { len: usize, requested: usize },

    #[error("joint action space has {size} candidates, above the cap of {cap}; use fewer platoons or sub-bands")]
    SearchSpaceTooLarge { size: u128, cap: u64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("missing checkpoint {}", .0.display())]
    MissingCheckpoint(PathBuf),

    #[error("checkpoint {}: {reason}", .path.display())]
    BadCheckpoint { path: PathBuf, reason: String },

    #[error("io error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
