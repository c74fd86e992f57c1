use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t_ms} ms outside [{lo_ms}, {hi_ms}] ms")]
    OutOfRange { t_ms: f64, lo_ms: f64, hi_ms: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid score: {0}")]
    InvalidScore(String),

    #[error("unknown scenario preset `{0}`")]
    UnknownPreset(String),

    #[error("blend requires at least one active gesture")]
    EmptyBlend,

    #[error("cannot blend gestures on different tract variables ({0} and {1})")]
    MixedTractVariables(String, String),

    #[error("coupling graph is disconnected; unreachable nodes: {0:?}")]
    Disconnected(Vec<String>),

    #[error("phase solution did not converge")]
    NotConverged,

    #[error("integration diverged on channel {channel} at {t_ms} ms")]
    Diverged { channel: String, t_ms: f64 },

    #[error("no movement: peak velocity {peak:.3} mm/s below floor {floor:.3} mm/s")]
    NoMovement { peak: f64, floor: f64 },

    #[error("no return movement after peak velocity at {t_ms:.3} ms")]
    NoReturnMovement { t_ms: f64 },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("zero standard deviation in group `{0}`")]
    ZeroSpread(String),

    #[error("too many parse failures: {failed} of {total} tokens")]
    TooManyFailures { failed: usize, total: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line tool: 2 for configuration
    /// problems, 3 for anything wrong with the data itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::UnknownPreset(_)
            | Error::InvalidArgument(_)
            | Error::InvalidScore(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
