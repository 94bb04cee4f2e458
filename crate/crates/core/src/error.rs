use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature did not converge: error estimate {estimate:e} above tolerance {tolerance:e}")]
    QuadratureNotConverged { estimate: f64, tolerance: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("assembly check failed: {0}")]
    Assembly(String),

    #[error("coercivity check failed for varpi = {varpi}, R = {radius}: min Rayleigh quotient {min_quotient:e}; increase varpi or R")]
    Coercivity { varpi: f64, radius: f64, min_quotient: f64 },

    #[error("branch tracking failed at |eta| = {eta:e}: overlap {overlap:.4} below threshold")]
    BranchTracking { eta: f64, overlap: f64 },

    #[error("dispersion fit residual {residual:e} above threshold {threshold:e}; use a smaller window")]
    FitResidual { residual: f64, threshold: f64 },

    #[error("right-hand side not orthogonal to the kernel: residual {0:e}")]
    KernelResidual(f64),

    #[error("spectral gap not positive: tau = {0:e}")]
    NoSpectralGap(f64),

    #[error("defective eigenvalue cluster at |eta| = {eta:e}: {detail}")]
    DefectiveCluster { eta: f64, detail: String },

    #[error("consistency check failed: {what}, worst residual {residual:e} at t = {time}")]
    Consistency { what: String, residual: f64, time: f64 },

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
