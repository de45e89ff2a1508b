use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("non-finite entry encountered in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("columns are not orthonormal: Gram defect {defect:.3e} exceeds {tolerance:.3e}")]
    NotOrthonormal { defect: f64, tolerance: f64 },

    #[error(
        "rank-deficient input: smallest singular value {smallest:.3e} is below {threshold:.3e}"
    )]
    Degenerate { smallest: f64, threshold: f64 },

    #[error("node index {index} out of range (last node is {last})")]
    IndexOutOfRange { index: usize, last: usize },

    #[error("grid has {steps} step(s); at least {required} are needed for {op}")]
    InsufficientGrid {
        op: &'static str,
        steps: usize,
        required: usize,
    },

    #[error("non-finite time {0}")]
    NonFiniteTime(f64),

    #[error("propagation failed at t = {time}: {source}")]
    Propagation {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Validation failures for run configurations. Each variant names the
/// offending key so that front ends can report it verbatim.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("could not parse config: {0}")]
    Syntax(String),

    #[error("missing required key `{0}`")]
    MissingKey(String),

    #[error("key `{key}` has the wrong type: expected {expected}")]
    WrongType { key: String, expected: &'static str },

    #[error("unknown model name `{0}`")]
    UnknownModel(String),

    #[error("model `{model}` requires parameter `{name}`")]
    MissingParameter { model: &'static str, name: String },

    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },

    #[error("steps must be ≥ 1 (got {0})")]
    Steps(i64),

    #[error("t_final must be finite and ≥ 0 (got {0})")]
    TFinal(f64),

    #[error("tolerance `{key}` must be > 0 (got {value})")]
    Tolerance { key: String, value: f64 },

    #[error("matrix `{key}` is not Hermitian (defect {defect:.3e})")]
    NonHermitianMatrix { key: String, defect: f64 },

    #[error("frame in `{key}` cannot be orthonormalized: {reason}")]
    FrameNotOrthonormalizable { key: String, reason: String },
}
