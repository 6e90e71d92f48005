use thiserror::Error;

pub type Result<T> = std::result::Result<T, MfacError>;

#[derive(Debug, Error)]
pub enum MfacError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("order mismatch: expected (ly={expected_ly}, lu={expected_lu}), got (ly={got_ly}, lu={got_lu})")]
    OrderMismatch {
        expected_ly: usize,
        expected_lu: usize,
        got_ly: usize,
        got_lu: usize,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("degenerate control gain {gain:e} (|gain| below guard {guard:e} with lambda = 0)")]
    DegenerateGain { gain: f64, guard: f64 },

    #[error("degenerate plant: {0}")]
    DegeneratePlant(String),

    #[error("insufficient history: {0}")]
    Window(String),

    #[error("inner iteration diverged at iteration {iteration} (predicted output {value:e})")]
    IterationDivergence { iteration: usize, value: f64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MfacError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        MfacError::Config(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        MfacError::Numeric(msg.into())
    }
}
