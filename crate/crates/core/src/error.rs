use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot convert {from} to {to}: incompatible dimensions")]
    IncompatibleUnits { from: String, to: String },

    #[error("unknown unit '{0}'")]
    UnknownUnit(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("x = {x} lies outside the tabulated range [{min}, {max}]")]
    OutOfRange { x: f64, min: f64, max: f64 },

    #[error("{path}: line {line}: malformed row: {reason}")]
    MalformedRow {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("{path}: x values must be strictly increasing (line {line})")]
    NonMonotone { path: String, line: usize },

    #[error("{path}: need at least {needed} rows, found {found}")]
    TooFewPoints {
        path: String,
        needed: usize,
        found: usize,
    },

    #[error("unknown preset '{name}' (available: {available})")]
    UnknownPreset { name: String, available: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("eigensolver did not converge for a {0}x{0} Hamiltonian")]
    EigenNotConverged(usize),

    #[error("requested {requested} states but the grid only has {available} points")]
    TooManyStates { requested: usize, available: usize },

    #[error("need at least {needed} bound levels, found {found}")]
    TooFewLevels { needed: usize, found: usize },

    #[error("non-finite wavefunction at step {step} (t = {time}): max|psi| = {max_abs}")]
    NonFinite { step: usize, time: f64, max_abs: f64 },

    #[error("contribution records were not requested for this propagation")]
    ContributionsNotRecorded,

    #[error("level {level} is outside the recorded basis of {available} bound states")]
    LevelOutOfRange { level: usize, available: usize },

    #[error("no missing rung detected; supply an explicit rung level to place the double-stepping pulse")]
    NoMissingRung,

    #[error("pulse train is empty")]
    EmptyTrain,

    #[error("total pulse energy is zero")]
    ZeroEnergy,

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenNotConverged(_) | Error::NonFinite { .. } | Error::NoMissingRung
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Json(_))
    }
}
