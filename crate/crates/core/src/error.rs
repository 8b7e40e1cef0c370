use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, DpwError>;

/// Every failure mode of the toolkit.
///
/// Numerical breakdowns that carry geometric meaning (leaving a
/// factorization cell, hitting a pole) have their own variants so callers
/// can flag the affected grid point and keep going.
#[derive(Debug, Clone, Error)]
pub enum DpwError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("loop evaluation at lambda = 0 is undefined")]
    ZeroLambda,

    #[error("loop is not invertible at truncation {bound}")]
    NotInvertible { bound: usize },

    #[error("loop lies outside the Birkhoff big cell (rcond = {rcond:.3e})")]
    OutsideBigCell { rcond: f64 },

    #[error("loop lies outside the Iwasawa cell: {reason}")]
    OutsideIwasawaCell { reason: String },

    #[error("degenerate gauge: diagonal entry {index} vanishes")]
    DegenerateGauge { index: usize },

    #[error("integration path meets the pole at {pole}")]
    PoleOnPath { pole: Complex64 },

    #[error("integration failed near z = {at}: {reason}")]
    IntegrationFailure { at: Complex64, reason: String },

    #[error("grid too coarse: {points} points along an axis, need at least {required}")]
    GridTooCoarse { points: usize, required: usize },

    #[error("one-form is not Lie-algebra valued (residual {residual:.3e})")]
    NotLieAlgebraValued { residual: f64 },

    #[error("frame is singular at grid point {index}")]
    SingularFrame { index: usize },

    #[error("invalid base-point move: {reason} (residual {residual:.3e})")]
    InvalidMove { reason: String, residual: f64 },

    #[error("required gauge element is not in the isotropy group (residual {residual:.3e})")]
    GaugeNotInIsotropy { residual: f64 },

    #[error("involutions fail to commute (residual {residual:.3e})")]
    CommutationFailure { residual: f64 },

    #[error("unsupported group model: {0}")]
    UnsupportedModel(String),

    #[error("schema violation: {0}")]
    Schema(String),
}

impl DpwError {
    /// Short machine-readable tag used in JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            DpwError::DimensionMismatch { .. } => "dimension_mismatch",
            DpwError::ZeroLambda => "zero_lambda",
            DpwError::NotInvertible { .. } => "not_invertible",
            DpwError::OutsideBigCell { .. } => "outside_big_cell",
            DpwError::OutsideIwasawaCell { .. } => "outside_iwasawa_cell",
            DpwError::DegenerateGauge { .. } => "degenerate_gauge",
            DpwError::PoleOnPath { .. } => "pole_on_path",
            DpwError::IntegrationFailure { .. } => "integration_failure",
            DpwError::GridTooCoarse { .. } => "grid_too_coarse",
            DpwError::NotLieAlgebraValued { .. } => "not_lie_algebra_valued",
            DpwError::SingularFrame { .. } => "singular_frame",
            DpwError::InvalidMove { .. } => "move_invalid",
            DpwError::GaugeNotInIsotropy { .. } => "gauge_not_in_isotropy",
            DpwError::CommutationFailure { .. } => "commutation_failure",
            DpwError::UnsupportedModel(_) => "unsupported_model",
            DpwError::Schema(_) => "schema",
        }
    }

    /// Residual attached to the error, when there is one.
    pub fn residual(&self) -> Option<f64> {
        match self {
            DpwError::OutsideBigCell { rcond } => Some(*rcond),
            DpwError::NotLieAlgebraValued { residual }
            | DpwError::InvalidMove { residual, .. }
            | DpwError::GaugeNotInIsotropy { residual }
            | DpwError::CommutationFailure { residual } => Some(*residual),
            _ => None,
        }
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            DpwError::NotInvertible { .. }
                | DpwError::OutsideBigCell { .. }
                | DpwError::OutsideIwasawaCell { .. }
                | DpwError::DegenerateGauge { .. }
                | DpwError::PoleOnPath { .. }
                | DpwError::IntegrationFailure { .. }
                | DpwError::SingularFrame { .. }
                | DpwError::CommutationFailure { .. }
        )
    }
}
