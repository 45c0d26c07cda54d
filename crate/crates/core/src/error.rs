use thiserror::Error;

/// Errors raised while building or solving an allocation problem.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse configuration: {0}")]
    Config(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unsupported reuse pattern: {0} colors (expected 1, 2 or 4)")]
    ReusePattern(usize),

    #[error("ill-conditioned channel matrix (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("beam {beam} has no terminal in slot {slot}")]
    EmptySlot { beam: usize, slot: usize },

    #[error("invalid root bracket [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("non-positive effective gain {0}")]
    NonPositiveGain(f64),

    #[error("non-positive beam power {0}")]
    NonPositivePower(f64),

    #[error("demand must be positive, got {0}")]
    ZeroDemand(f64),

    #[error("zero-norm channel vector")]
    ZeroChannel,

    #[error("candidate pool exhausted")]
    PoolExhausted,

    #[error("infeasible assignment: {0}")]
    InfeasibleAssignment(String),

    #[error("enumeration over {terminals} terminals exceeds the cap of {cap}")]
    EnumerationTooLarge { terminals: usize, cap: usize },

    #[error("grid oracle supports at most 3 beams, got {0}")]
    DimensionTooLarge(usize),

    #[error("OMA baseline requires pairs (max_per_slot = 2), got {0}")]
    OmaPairing(usize),

    #[error("instance {instance}: {source}")]
    Instance {
        instance: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
