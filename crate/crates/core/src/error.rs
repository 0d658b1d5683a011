use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}x{expected}, found {found}")]
    DimensionMismatch { expected: usize, found: String },

    #[error("matrix is not Hermitian: max |rho_mn - conj(rho_nm)| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("trace {trace:.6} outside tolerance {tolerance:.1e} of unity")]
    TraceOutOfTolerance { trace: f64, tolerance: f64 },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:.3e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("Cauchy-Schwarz violated at ({m},{n}) by {excess:.3e}")]
    CauchySchwarz { m: usize, n: usize, excess: f64 },

    #[error("index {index} out of range for cutoff n_max = {n_max}")]
    IndexOutOfRange { index: usize, n_max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("oracle dimension {dim} insufficient: successive truncations differ by {deviation:.3e}")]
    OracleDimension { dim: usize, deviation: f64 },

    #[error("optimizer did not converge (best value {best:.9})")]
    NonConvergence { best: f64 },

    #[error("lambda grid too coarse: minimum not bracketed")]
    GridTooCoarse,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("unknown format `{0}`")]
    UnknownFormat(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Numerical failures as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::OracleDimension { .. } | Error::GridTooCoarse
        )
    }
}
