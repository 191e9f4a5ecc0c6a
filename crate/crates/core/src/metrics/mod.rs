//! Evaluation metrics: Fourier shell correlation, pick precision/recall and
//! pose errors.

mod fsc;
mod picks;
mod pose;

pub use fsc::{fft3, fsc, resolution_at, FscCurve, FscShell, Resolution};
pub use picks::{auprc, match_picks, pr_curve, precision_at, top_n, Auprc, LabeledPick, Pick, PickMatch, PrCurve, PrPoint};
pub use pose::{angular_error, pose_loss, AngularError, PoseBatch, PosePair};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("volume dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch([usize; 3], [usize; 3]),
    #[error("FSC needs cubic volumes, got {0:?}")]
    NotCubic([usize; 3]),
    #[error("invalid rotation in pair {0}")]
    InvalidRotation(usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
}
