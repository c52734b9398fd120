use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented range. `name` is the offending key.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: String, reason: String },

    #[error("point {point:?} lies outside the domain (level set {level:.3e})")]
    OutsideDomain { point: [f64; 3], level: f64 },

    #[error("degenerate level-set gradient at {point:?} (|grad| = {norm:.3e})")]
    DegenerateGradient { point: [f64; 3], norm: f64 },

    /// The wall kernel was asked to reflect a velocity that is not incoming.
    #[error("velocity is not incoming at the wall (v.n = {normal_component:.3e})")]
    NotIncoming { normal_component: f64 },

    #[error("particle {index} exceeded {max_events} boundary events (speed {speed:.3e})")]
    RunawayEvents {
        index: usize,
        speed: f64,
        max_events: u64,
    },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("weighted norm {weight} is infinite for this initial datum")]
    InfiniteNorm { weight: String },

    #[error("fit refused: {0}")]
    FitRefused(String),

    #[error("audit aborted: {0}")]
    AuditAborted(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
