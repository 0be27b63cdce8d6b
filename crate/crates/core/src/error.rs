use thiserror::Error;

/// Errors raised by the geometry, quadrature, series and evolution layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("kernel singularity at the origin")]
    Singularity,
    #[error("degenerate boundary: {0}")]
    DegenerateBoundary(String),
    #[error("point outside the admissible graph window (|s| = {s:.3e} > R1 = {r1:.3e})")]
    OutOfWindow { s: f64, r1: f64 },
    #[error("point is not on the boundary (distance {0:.3e})")]
    NotOnBoundary(f64),
    #[error("point lies within the boundary band but is not a boundary node; use the jump evaluation")]
    NeedsJumpEvaluation,
    #[error("extrapolation did not converge: {0}")]
    NonConvergent(String),
    #[error("time {t} is at or beyond the blow-up horizon {horizon}")]
    BlowUpHorizon { t: f64, horizon: f64 },
    #[error("time {t} is outside the usable series radius {radius}")]
    OutsideRadius { t: f64, radius: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("missing coefficient level {0}")]
    MissingLevel(usize),
    #[error("boundary refit residual {residual:.3e} exceeds threshold {threshold:.3e}")]
    Resolution { residual: f64, threshold: f64 },
    #[error("topology error: {0}")]
    Topology(String),
    #[error("empty mesh")]
    EmptyMesh,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
