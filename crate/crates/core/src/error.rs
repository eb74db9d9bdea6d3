use thiserror::Error;

/// Errors raised across the knockoff pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("column {0} has (near) zero norm")]
    ZeroColumn(usize),
    #[error("Gram matrix is singular (smallest eigenvalue {0:e})")]
    SingularGram(f64),
    #[error("gap vector is infeasible: 2Σ - diag(s) has eigenvalue {0:e}")]
    InfeasibleGap(f64),
    #[error("dimension error: {0}")]
    DimensionError(String),
    #[error("residual variance is undefined with zero residual degrees of freedom")]
    DegenerateResiduals,
    #[error("SDP solver diverged: {0}")]
    SolverDiverged(String),
    #[error("coordinate descent did not converge within {0} sweeps")]
    MaxIterations(usize),
    #[error("augmented Gram matrix is singular (condition number {0:e})")]
    SingularAugmentedGram(f64),
    #[error("level q = {0} is outside [0, 1]")]
    InvalidLevel(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{features} features exceed {rows} observations")]
    TooManyFeatures { features: usize, rows: usize },
    #[error("binomial enumeration overflow: N = {0} exceeds 60")]
    Overflow(usize),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable variant name, used as the CLI diagnostic prefix.
    pub fn name(&self) -> &'static str {
        match self {
            Error::ZeroColumn(_) => "ZeroColumn",
            Error::SingularGram(_) => "SingularGram",
            Error::InfeasibleGap(_) => "InfeasibleGap",
            Error::DimensionError(_) => "DimensionError",
            Error::DegenerateResiduals => "DegenerateResiduals",
            Error::SolverDiverged(_) => "SolverDiverged",
            Error::MaxIterations(_) => "MaxIterations",
            Error::SingularAugmentedGram(_) => "SingularAugmentedGram",
            Error::InvalidLevel(_) => "InvalidLevel",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::ParseError { .. } => "ParseError",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::TooManyFeatures { .. } => "TooManyFeatures",
            Error::Overflow(_) => "Overflow",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_level(q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::InvalidLevel(q))
    }
}
