//! One-feature linear discriminant, threshold selection and evaluation.

mod lda;
mod metrics;
mod stats;

pub use lda::{
    fit_lda, sweep_threshold, threshold_grid, LdaModel, Level, SweepResult, DEFAULT_SWEEP_STEP,
    DEFAULT_THRESHOLD,
};
pub use metrics::{confusion, metrics, ConfusionMatrix, Metrics};
pub use stats::{
    class_stats, kde, sample_stats, silverman_bandwidth, ClassStats, KdeCurve, KDE_GRID_POINTS,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ClassifierError {
    #[error("need at least two samples per class (class 0: {class0}, class 1: {class1})")]
    InsufficientClasses { class0: usize, class1: usize },
    #[error("degenerate fit: {0}")]
    Degenerate(&'static str),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("labels must be 0 or 1, got {0}")]
    InvalidLabel(u8),
    #[error("non-finite score at index {0}")]
    NonFinite(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("sweep step {0} must be in (0, 1] and divide 1 evenly")]
    InvalidStep(f64),
    #[error("invalid model: {0}")]
    InvalidModel(&'static str),
}
