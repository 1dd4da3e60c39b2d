use thiserror::Error;

use crate::profile::MetricProfile;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("parameter constraint violated: {0}")]
    Parameter(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// The flow produced a non-finite value or a non-positive g. The last
    /// valid state is kept for post-mortem inspection.
    #[error("flow blew through at t = {t}: {detail}")]
    BlowThrough {
        t: f64,
        detail: String,
        last_valid: Box<MetricProfile>,
    },

    #[error("singular-time estimation failed: {0}")]
    Estimation(String),

    #[error("blow-up extraction failed: {0}")]
    Extraction(String),

    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("root solver failed: {0}")]
    Solver(String),

    #[error("band is empty: {0}")]
    EmptyBand(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
