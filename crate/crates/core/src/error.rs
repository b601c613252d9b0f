use thiserror::Error;

/// Errors raised by the numerical kernels and the experiment pipeline.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dyadic index {k} outside resolvable range [{min}, {max}]")]
    DyadicRange { k: i32, min: i32, max: i32 },

    #[error("point {point:?} outside the chart domain ({domain})")]
    ChartDomain { point: Vec<f64>, domain: String },

    #[error("singular matrix: determinant {det:.3e} below {threshold:.1e}")]
    Singular { det: f64, threshold: f64 },

    #[error("antisymmetry violated: max defect {defect:.3e} exceeds {tolerance:.1e}")]
    Antisymmetry { defect: f64, tolerance: f64 },

    #[error("trajectory has {got} slices, need at least {need}")]
    TooFewSlices { got: usize, need: usize },

    #[error("blow-up guard tripped at t = {time}: {reason}")]
    BlowUp { time: f64, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
