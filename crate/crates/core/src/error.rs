use thiserror::Error;

/// Errors raised by every layer of the crate.
///
/// The CLI maps these onto process exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: &'static str, reason: String },

    #[error("non-finite input {0} to a special function")]
    NonFinite(f64),

    #[error("could not isolate zero #{index} of J1 in [{lo}, {hi}]")]
    RootBracket { index: usize, lo: f64, hi: f64 },

    #[error(
        "quadrature order {quad_order} is too low for {level_count} levels: \
         orthonormality residual {residual:.3e} between levels {m} and {n}"
    )]
    InsufficientQuadrature {
        level_count: usize,
        quad_order: usize,
        residual: f64,
        m: usize,
        n: usize,
    },

    #[error("basis file line {line}: {reason}")]
    MalformedBasis { line: usize, reason: String },

    #[error("imported basis is not orthonormal: |(f_{m}, f_{n}) - delta| = {residual:.3e}")]
    NotOrthonormal { m: usize, n: usize, residual: f64 },

    #[error(
        "time {t} is below the certified minimum {t_min}: the truncated expansion \
         has uncontrolled truncation error there"
    )]
    BelowMinimumTime { t: f64, t_min: f64 },

    #[error("{available} levels cannot certify tail tolerance {requested:e}; achievable {achievable:.3e}")]
    TruncationUncertified {
        available: usize,
        requested: f64,
        achievable: f64,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("boundary data normalization is {value:.6e}, expected 1")]
    Unnormalized { value: f64 },

    #[error("operation requires positive boundary data but level {level} is signed")]
    SignedData { level: usize },

    #[error("singular transition: {which}({x}, {t}) = {value:e} is not positive")]
    Singular {
        which: &'static str,
        x: f64,
        t: f64,
        value: f64,
    },

    #[error("pinning kernel g({x}, {dt}, {y}) = {value:e} is too small to condition on")]
    PinningPoint { x: f64, dt: f64, y: f64, value: f64 },

    #[error("weights are invalid: {0}")]
    InvalidWeights(String),

    #[error("infeasible spectral average {target}: {reason} (feasible bracket ({lo}, {hi}))")]
    Infeasible {
        target: f64,
        lo: f64,
        hi: f64,
        reason: String,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("positivity violated: {0}")]
    Positivity(String),

    #[error("{0}")]
    Overflow(String),

    #[error("trace deficit {deficit:.3e} is too large to classify the operator")]
    TraceDeficit { deficit: f64 },

    #[error("biorthonormality violated: relative defect of (u_{m}, v_{n}) is {residual:.3e}")]
    NotBiorthonormal { m: usize, n: usize, residual: f64 },

    #[error("path {path}: {source}")]
    Path {
        path: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invariant check failed: {0}")]
    Invariant(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field,
            reason: reason.into(),
        }
    }

    /// Exit code contract of the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument { .. }
            | Error::Config(_)
            | Error::MalformedBasis { .. }
            | Error::NotOrthonormal { .. }
            | Error::InsufficientQuadrature { .. }
            | Error::BelowMinimumTime { .. }
            | Error::LengthMismatch { .. }
            | Error::Positivity(_)
            | Error::InvalidWeights(_)
            | Error::Io(_) => 2,
            Error::Infeasible { .. } | Error::TruncationUncertified { .. } => 3,
            Error::NonConvergence { .. } => 4,
            Error::Path { source, .. } => source.exit_code(),
            _ => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
