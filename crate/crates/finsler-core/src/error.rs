use thiserror::Error;

#[derive(Debug, Error)]
pub enum FinslerError {
    #[error("derivative order overflow: requested ({x_order}, {y_order}), supported up to (2, 4)")]
    OrderOverflow { x_order: usize, y_order: usize },

    #[error("point {0:?} lies outside the declared chart domain")]
    OutsideChart(Vec<f64>),

    #[error("fiber vector norm {norm:.3e} is below the fiber floor {floor:.3e}")]
    FiberFloor { norm: f64, floor: f64 },

    #[error("non-finite intermediate while evaluating {context}")]
    NonFinite { context: String },

    #[error("Randers slope >= 1: |b|_a = {norm_b} at x = {at:?}")]
    RandersSlope { norm_b: f64, at: Vec<f64> },

    #[error("|beta/alpha| = {s} exceeds the declared b0 = {b0} at a validation sample")]
    B0Exceeded { s: f64, b0: f64 },

    #[error("fundamental tensor is not positive definite at x = {x:?}, y = {y:?} (min eigenvalue {min_eig:.3e})")]
    Indefinite {
        x: Vec<f64>,
        y: Vec<f64>,
        min_eig: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate flag: Gram determinant {gram:.3e} below threshold")]
    DegenerateFlag { gram: f64 },

    #[error("geodesic left the chart domain at t = {t}")]
    ChartExit { t: f64 },

    #[error("FD step {step:.3e} underflows against the fiber floor {floor:.3e}")]
    StepUnderflow { step: f64, floor: f64 },

    #[error("Berwald coefficient identity check failed: max residual {residual:.3e} against dN/dy")]
    BerwaldIdentity { residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, FinslerError>;
