use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A scalar argument fell outside the domain of the formula it feeds.
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Total operator time was zero, so the leverage ratio has no value.
    #[error("leverage is undefined: total operator time is zero")]
    UndefinedLeverage,

    /// The per-task ceiling is unbounded because the task carries no novel bits.
    #[error("per-task ceiling is unbounded: i_novel is zero")]
    UnboundedCeiling,

    #[error("window ({t0}, {t1}] contains no operator time")]
    EmptyWindow { t0: f64, t1: f64 },

    #[error("task spawn links form a cycle through `{0}`")]
    SpawnCycle(String),

    #[error("dependency graph contains a cycle through `{0}`")]
    DependencyCycle(String),

    #[error("instance has {nodes} nodes, above the limit of {limit}")]
    SizeLimit { nodes: usize, limit: usize },

    #[error("conservation violated for task `{task}`: deficit of {deficit_bits} bits")]
    ConservationViolated { task: String, deficit_bits: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed trace at event {index}: {reason}")]
    MalformedTrace { index: usize, reason: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: field `{field}` {message}")]
    FieldValidation {
        line: usize,
        field: String,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }

    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
