use thiserror::Error;

/// Errors raised by the numerical kernel and the model pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix entries must be finite: {0}")]
    NonFinite(String),

    #[error("matrix is not Hermitian (asymmetry {asymmetry:e} exceeds {threshold:e})")]
    NotHermitian { asymmetry: f64, threshold: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {min_eigenvalue:e} below {threshold:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64, threshold: f64 },

    #[error("eigensolver did not converge on a {dim}x{dim} matrix")]
    NonConvergence { dim: usize },

    #[error("invalid tolerance policy: {0}")]
    InvalidTolerance(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model failed validation: {0}")]
    ValidationFailed(String),

    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("computed dimension {value} is not within 0.1 of an integer ({what})")]
    NonIntegralDimension { what: String, value: f64 },

    #[error("spectral splitting failed after {attempts} attempts: {context}")]
    RetriesExhausted { attempts: usize, context: String },

    #[error("block factorization residual {residual:e} exceeds {threshold:e}")]
    FactorizationResidual { residual: f64, threshold: f64 },

    #[error("component extraction residual {residual:e} exceeds {threshold:e}")]
    ComponentExtractionResidual { residual: f64, threshold: f64 },

    #[error("not a von Neumann algebra: {0}")]
    InvalidAlgebra(String),

    #[error("sandwich condition violated (containment {containment:e}, commutation {commutation:e})")]
    SandwichViolation { containment: f64, commutation: f64 },

    #[error("invalid generator parameters: {0}")]
    InvalidParameters(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
