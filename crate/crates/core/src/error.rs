use thiserror::Error;

/// Errors raised by the numerical pipelines and the scenario runner.
#[derive(Debug, Error)]
pub enum GpeError {
    #[error("invalid field specification: {0}")]
    InvalidField(String),

    #[error("degenerate domain [{x_lo}, {x_hi}]")]
    DegenerateDomain { x_lo: f64, x_hi: f64 },

    #[error("position x = {x} lies outside the domain [{x_lo}, {x_hi}]")]
    OutsideDomain { x: f64, x_lo: f64, x_hi: f64 },

    #[error("ellipticity violated: a = {a} < alpha = {alpha} at (t = {t}, x = {x})")]
    Ellipticity { a: f64, alpha: f64, t: f64, x: f64 },

    #[error("field is not separable in time: {0}")]
    NotSeparable(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("monotonicity condition violated: dt * max(c+) = {value} >= 1")]
    Monotonicity { value: f64 },

    #[error("singular tridiagonal system at row {row}")]
    Singular { row: usize },

    #[error("positivity lost at t = {t} (min entry {min}); fall back to backward Euler")]
    PositivityLost { t: f64, min: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("window of length {window} exceeds half the trace span {span}")]
    TrustCollapse { window: f64, span: f64 },

    #[error("iteration cap of {0} exceeded without convergence")]
    NoConvergence(usize),

    #[error("inconsistent provenance: {0}")]
    Provenance(String),

    #[error("scenario error at {path}: {message}")]
    Scenario { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GpeError>;
