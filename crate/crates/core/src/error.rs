use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expression error at column {column}: {message}")]
    Expr { column: usize, message: String },

    #[error("patch {0} yielded no boundary points")]
    PatchEmpty(usize),

    #[error("domain has no boundary patches")]
    NoPatches,

    #[error("ray in direction {direction:?} crosses the boundary more than once")]
    MultipleCrossings { direction: Vec<f64> },

    #[error("ray in direction {direction:?} never leaves the domain inside the bounding box")]
    NoCrossing { direction: Vec<f64> },

    #[error("domain has empty interior")]
    EmptyInterior,

    #[error("point {0:?} is not an interior point")]
    NotInterior(Vec<f64>),

    #[error("point {0:?} lies outside the domain closure")]
    Exterior(Vec<f64>),

    #[error("sampled center {0:?} of the kernel ball is not interior")]
    BallNotInterior(Vec<f64>),

    #[error("level set is empty along every sampled ray")]
    LevelSetEmpty,

    #[error("level set is not bounded inside the search radius (direction {0:?})")]
    LevelSetUnbounded(Vec<f64>),

    #[error("no bounding function resolves boundary point {0:?}")]
    Unresolved(Vec<f64>),

    #[error("bounding family is degenerate: min gradient norm {eta_minus:e} at {point:?}")]
    DegenerateFamily { eta_minus: f64, point: Vec<f64> },

    #[error("chosen direction at {point:?} is not a Bony outer normal")]
    NotAnOuterNormal { point: Vec<f64> },

    #[error("adaptive step fell below {0:e}")]
    StepUnderflow(f64),

    #[error("non-finite state at t = {0}")]
    NonFinite(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("inward field is not certified (worst margin {0:e})")]
    NoInwardCertificate(f64),

    #[error("no periodic-orbit theorem applies; pass force to override")]
    NotApplicable,

    #[error("{file}:{line}: {message}")]
    Scenario {
        file: String,
        line: usize,
        message: String,
    },

    #[error("unknown gallery entry `{0}`")]
    UnknownGallery(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
