use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator is not hermitian: |A[{row},{col}] - conj(A[{col},{row}])| = {deviation:e}")]
    NotHermitian {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("operator must be square and non-empty, got {rows}x{cols}")]
    BadShape { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("hamiltonian and number operator do not commute: |[H,N]|_max = {commutator:e} > {bound:e}")]
    CommutationViolation { commutator: f64, bound: f64 },

    #[error("coupling operator {index} is not traceless: |Tr A| = {trace:e}")]
    NotTraceless { index: usize, trace: f64 },

    #[error("eigenvalue {value} of the number operator is not an integer (state {index})")]
    NonIntegerNumber { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bath statistics mismatch: {0}")]
    WrongStatistics(String),

    #[error("bose occupation undefined for omega = {omega} <= mu = {mu}")]
    ChemicalPotentialDomain { omega: f64, mu: f64 },

    #[error("average occupation undefined at omega = {omega}: all tunneling rates vanish")]
    UndefinedAverage { omega: f64 },

    #[error("divergent population ratio: {0}")]
    DivergentRatio(String),

    #[error("ladder is disconnected at link {link} (both rates vanish)")]
    DisconnectedLadder { link: usize },

    #[error("stationary state is not unique: {0}")]
    NonUnique(String),

    #[error("generator is not of ladder form: {0}")]
    NotALadder(String),

    #[error("populations couple to coherences: {0}")]
    SecularStructure(String),

    #[error("nullspace solve failed: {0}")]
    Nullspace(String),

    #[error("time step too large: {0}")]
    StepSize(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
