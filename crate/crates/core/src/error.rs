use thiserror::Error;

/// Errors raised by network construction, the spectral layer, the effective
/// Hamiltonian builders and the transfer protocols.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid terminal `{label}`: {reason}")]
    InvalidTerminal { label: String, reason: String },

    #[error("unknown terminal label `{0}`")]
    UnknownLabel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not Hermitian (max |A - A^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{value} is not an eigenvalue within tolerance {tolerance:e}")]
    NotAnEigenvalue { value: f64, tolerance: f64 },

    #[error(
        "eigenvalue {value} is {multiplicity}-fold degenerate; a resonant projection onto a \
         degenerate mode does not reduce to a three-level chain"
    )]
    DegenerateMode { value: f64, multiplicity: usize },

    #[error("terminal `{label}` has field {field} but the resonance is {mode_value}")]
    NotResonant { label: String, field: f64, mode_value: f64 },

    #[error(
        "terminal `{label}` field {field} collides with mode {mode_index} \
         (eigenvalue {mode_value}, detuning {detuning:e})"
    )]
    ResonantCollision {
        label: String,
        field: f64,
        mode_index: usize,
        mode_value: f64,
        detuning: f64,
    },

    #[error("terminal `{label}` has no overlap with mode {mode_value} (g = 0)")]
    ClosedChannel { label: String, mode_value: f64 },

    #[error("effective off-diagonal vanishes ({0:e}); no non-resonant channel")]
    NoNonresonantChannel(f64),

    #[error("calibration failed: {0}")]
    CalibrationFailure(String),

    #[error("effective Hamiltonian is not calibrated: {0}")]
    NotCalibrated(String),

    #[error("frequency planning infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
