//! The keypoint refinement module: patch extraction, the five-layer shared
//! convnet, descriptor-weighted score maps, soft-argmax displacement, and
//! the scoring variants used for ablation.

mod config;
mod forward;
mod patch;
mod weights;

pub use config::{RefineConfig, Variant};
pub use forward::{backward, forward, ForwardCache, Refinement, FEATURE_NORM_EPS};
pub use patch::{extract_patch, round_half_away, GrayImage, PatchOutcome};
pub use weights::{NetworkGrads, NetworkWeights};

use alloc::vec::Vec;

use crate::geometry::PixelPoint;
use crate::tensor::{Tensor, TensorError};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetError {
    #[error("configuration: {0}")]
    Config(&'static str),
    #[error("patch shape: expected {expected:?}, got {got1:?} and {got2:?}")]
    BadPatchShape {
        expected: (usize, usize, usize),
        got1: (usize, usize, usize),
        got2: (usize, usize, usize),
    },
    #[error("descriptor length: expected {expected}, got {got1} and {got2}")]
    BadDescriptorLength {
        expected: usize,
        got1: usize,
        got2: usize,
    },
    #[error("keypoint lies outside the image")]
    KeypointOutsideImage,
    #[error("configuration requires a detector score channel but none was provided")]
    MissingScoreChannel,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Everything the network sees of one match: the two patches and the two
/// matched descriptors, plus the unrefined keypoint locations they came
/// from. Patches and descriptors are constants to the optimizer.
#[derive(Debug, Clone)]
pub struct PatchPair<T> {
    pub patch1: Tensor<T>,
    pub patch2: Tensor<T>,
    pub d1: Vec<T>,
    pub d2: Vec<T>,
    pub center1: PixelPoint,
    pub center2: PixelPoint,
}

/// One refined match in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedMatch {
    pub delta1: [f64; 2],
    pub delta2: [f64; 2],
    pub p1_refined: PixelPoint,
    pub p2_refined: PixelPoint,
}

impl RefinedMatch {
    /// Pass-through for border-skipped matches: zero displacement, original
    /// keypoints.
    pub fn unrefined(p1: PixelPoint, p2: PixelPoint) -> Self {
        Self {
            delta1: [0.0; 2],
            delta2: [0.0; 2],
            p1_refined: p1,
            p2_refined: p2,
        }
    }
}

/// Add the displacements onto the unrefined keypoints. Exact addition, no
/// rounding anywhere.
pub fn apply_offsets<T: Real>(
    pair: &PatchPair<T>,
    delta1: [T; 2],
    delta2: [T; 2],
) -> RefinedMatch {
    let d1 = [delta1[0].into_f64(), delta1[1].into_f64()];
    let d2 = [delta2[0].into_f64(), delta2[1].into_f64()];
    RefinedMatch {
        delta1: d1,
        delta2: d2,
        p1_refined: PixelPoint::new(pair.center1.x + d1[0], pair.center1.y + d1[1]),
        p2_refined: PixelPoint::new(pair.center2.x + d2[0], pair.center2.y + d2[1]),
    }
}
