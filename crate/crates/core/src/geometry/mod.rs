//! Calibrated two-view geometry.
//!
//! All geometry runs in `f64` regardless of what precision the network uses.
//! The central objects are normalized image points (pixel coordinates pushed
//! through the intrinsics) and the essential matrix `E` relating two views:
//! a correspondence `(n1, n2)` of the same 3D point satisfies
//! `n2ᵀ · E · n1 = 0`.
//!
//! Pose convention: [`RelativePose`] maps camera-1 coordinates into camera-2,
//! `X2 = R · X1 + t`, and `E = [t]× · R`.

mod epipolar;
mod metrics;
mod pose;
mod types;

pub use epipolar::{
    epipolar_distance, epipolar_error, epipolar_error_grad, epipolar_loss, epipolar_loss_grad,
    mean_focal, normalized_threshold, EpipolarTerm, LossTerm,
};
pub use metrics::{auc, median, FAILED_POSE_ERROR_DEG};
pub use pose::{
    decompose_essential, pose_error, rotation_error_deg, translation_error_deg,
};
pub use types::{
    CameraIntrinsics, Correspondence, EssentialMatrix, GeometryError, NormalizedPoint, PixelPoint,
    RelativePose,
};
