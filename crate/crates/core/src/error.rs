//! Crate-wide error type.

use alloc::string::String;

/// Errors produced by any operation in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{op}: empty input")]
    EmptyInput { op: &'static str },
    #[error("invalid config: {detail}")]
    InvalidConfig { detail: String },
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("{op}: non-finite value encountered")]
    NonFinite { op: &'static str },
    #[error("schedule step {step} beyond total {total}")]
    StepOutOfRange { step: u64, total: u64 },
    #[error("label shift {shift} out of range for {len} frames")]
    ShiftOutOfRange { shift: usize, len: usize },
    #[error("run has {frames} frames, shorter than window {window}")]
    RunShorterThanWindow { frames: usize, window: usize },
    #[error("condition index {index} unknown")]
    UnknownCondition { index: usize },
    #[error("{op}: constant input has no defined correlation")]
    ConstantInput { op: &'static str },
    #[error("ROC needs at least one positive and one negative frame")]
    SingleClassTruth,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("beta map is flat; no peak voxel")]
    FlatBetaMap,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    TrainDiverged { epoch: usize, batch: usize },
    #[error("majority vote over zero tallies")]
    NoVotes,
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(detail: impl Into<String>) -> Self {
        Error::InvalidConfig {
            detail: detail.into(),
        }
    }
}
