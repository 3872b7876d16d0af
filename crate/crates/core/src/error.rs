use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate projection at node {node}: norm {norm:e} is below 1e-12")]
    DegenerateProjection { node: usize, norm: f64 },

    #[error(
        "midpoint fixed point did not converge in {iterations} iterations (last increment {increment:e}); reduce dt"
    )]
    StepSize { iterations: usize, increment: f64 },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("trajectory {trajectory} failed at t = {t}: {source}")]
    Trajectory {
        trajectory: u64,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("observer aborted at t = {t}: {message}")]
    Observer { t: f64, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
