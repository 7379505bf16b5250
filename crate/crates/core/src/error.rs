use thiserror::Error;

/// Errors produced anywhere in the discovery pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpdeError {
    #[error("grid dimension too small: nt={nt}, nx={nx} (need at least {min} in each)")]
    DimensionTooSmall { nt: usize, nx: usize, min: usize },
    #[error("grid steps must be positive: dt={dt}, dx={dx}")]
    NonPositiveStep { dt: f64, dx: f64 },
    #[error("field shape {got:?} does not match expected {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("clean field has zero norm")]
    ZeroCleanField,
    #[error("coefficient vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("solver diverged at step {step}")]
    SolverDiverged { step: usize },
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),
    #[error("unstable parameters: {0}")]
    Unstable(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("polynomial window {window} too small for degree {degree}")]
    WindowTooSmall { window: usize, degree: usize },
    #[error("polynomial degree {0} too small (need at least 3)")]
    DegreeTooSmall(usize),
    #[error("unknown factor {0}")]
    UnknownFactor(String),
    #[error("degenerate term {0}: a time frame has zero norm")]
    DegenerateTerm(String),
    #[error("singular linear system")]
    SingularSystem,
    #[error("rank-deficient least-squares system")]
    RankDeficient,
    #[error("could not produce enough distinct terms from the factor pool")]
    PoolExhausted,
    #[error("degenerate discovery: {0}")]
    DegenerateDiscovery(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for EpdeError {
    fn from(e: std::io::Error) -> Self {
        EpdeError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, EpdeError>;
