use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size for {what}: got {got}, need at least {min}")]
    InvalidSize {
        what: &'static str,
        got: usize,
        min: usize,
    },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("graph generation failed: {0}")]
    Generation(String),
    #[error("operator construction failed: {0}")]
    Construction(String),
    #[error("integration accuracy lost at t = {t}: trace deviation {deviation:e}")]
    IntegrationAccuracy { t: f64, deviation: f64 },
    #[error("cannot balance dataset: {0}")]
    Balance(String),
    #[error("cannot split dataset: {0}")]
    Split(String),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("training diverged (NaN loss) in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("degenerate data: {0}")]
    Rank(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
