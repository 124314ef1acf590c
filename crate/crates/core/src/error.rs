use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not stable (spectral radius {radius})")]
    NotStable { radius: f64 },

    #[error("riccati iteration did not reach a stabilizing solution: {0}")]
    NotStabilizable(String),

    #[error("closed loop is unstable (spectral radius {radius})")]
    Unstable { radius: f64 },

    #[error("joint noise covariance is degenerate (smallest eigenvalue {lambda_min})")]
    DegenerateNoise { lambda_min: f64 },

    #[error("system generation failed for seed {seed} after {attempts} attempts")]
    GenerationFailed { seed: u64, attempts: usize },

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("model order {model} does not match dataset order {data}")]
    OrderMismatch { model: usize, data: usize },

    #[error("predictor A - KC is unstable (spectral radius {radius})")]
    PredictorUnstable { radius: f64 },

    #[error("rho = {rho} does not exceed the predictor spectral radius {radius}")]
    RhoTooSmall { rho: f64, radius: f64 },

    #[error("T0 candidate {candidate} is below the admissible floor {floor}")]
    InvalidT0 { candidate: f64, floor: f64 },

    #[error("T = {t} is below the validity threshold T0 = {t0}")]
    TBelowT0 { t: f64, t0: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    /// Tags an error with the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
