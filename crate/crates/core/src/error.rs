use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the laboratory. Numeric payloads are reported in `f64`
/// regardless of the scalar type the computation ran in.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("operator is not Hermitian: relative Frobenius defect {defect:e}")]
    NotHermitian { defect: f64 },

    #[error("no spectral gap between the H0 bands: {0}")]
    NoGap(String),

    #[error("eigenvalue tracking lost at lambda = {lambda}: best overlap {overlap:.4} < 0.8")]
    TrackingLost { lambda: f64, overlap: f64 },

    #[error("no eigenvalue dives into the lower band for coupling up to {lambda_max}")]
    NoDive { lambda_max: f64 },

    #[error("coupling {lambda} is not over-critical (lambda_c = {lambda_c})")]
    OverUnderCritical { lambda: f64, lambda_c: f64 },

    #[error("no eigenvalue inside the gap at effective coupling {lambda_eff}")]
    NoGapState { lambda_eff: f64 },

    #[error("static Moller approximant has no plateau: residual {residual:.4} > 0.05 at T = {horizon}")]
    NoPlateau { horizon: f64, residual: f64 },

    #[error("time step underflow on [{t_from}, {t_to}]: step {step:e}")]
    StepUnderflow { t_from: f64, t_to: f64, step: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient sweep grid: {0}")]
    InsufficientGrid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
