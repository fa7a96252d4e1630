use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the {which} domain")]
    Domain { which: &'static str, point: Vec<f64> },

    #[error("no preimage for momentum {p:?} at x = {x:?}: {reason}")]
    NoPreimage { x: Vec<f64>, p: Vec<f64>, reason: String },

    #[error("support at {x0:?} exceeds u by {excess:e} at {at:?}")]
    SupportViolation { x0: Vec<f64>, at: Vec<f64>, excess: f64 },

    #[error("admissibility gate failed: {0}")]
    Admissibility(String),

    #[error("support gap h = {h:e} at x0 = {x0:?}, r = {r}; the trial construction needs h > 0")]
    HNonPositive { x0: Vec<f64>, r: f64, h: f64 },

    #[error("operation requires a {expected} benefit, got {got}")]
    Family { expected: String, got: String },

    #[error("no nonparticipation boundary: {0}")]
    NoBoundary(String),

    #[error("config: {0}")]
    Config(String),

    #[error("expression `{src}`: {msg}")]
    Expr { src: String, msg: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
