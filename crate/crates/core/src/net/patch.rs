//! Patch extraction around detected keypoints.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec::Vec;

use super::config::RefineConfig;
use super::NetError;
use crate::geometry::PixelPoint;
use crate::tensor::Tensor;
use crate::Real;

/// A grayscale image with an optional per-pixel detector score plane, both
/// row-major. Values are expected in [0, 1] but nothing here enforces it;
/// the synthetic generator guarantees it at render time.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    pub scores: Option<Vec<f64>>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>, scores: Option<Vec<f64>>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer vs size");
        if let Some(s) = &scores {
            assert_eq!(s.len(), width * height, "score buffer vs size");
        }
        Self {
            width,
            height,
            pixels,
            scores,
        }
    }
}

/// Nearest integer with halves away from zero, the crate-wide convention
/// for snapping sub-pixel keypoints onto the pixel grid.
pub fn round_half_away(x: f64) -> i64 {
    x.round() as i64
}

/// Extraction either yields a patch or marks the match for pass-through.
#[derive(Debug, Clone, PartialEq)]
pub enum PatchOutcome<T> {
    Patch(Tensor<T>),
    /// The window would cross the image border. The match is not refined;
    /// feeding the network padding-invented content would be worse than
    /// leaving the keypoint alone.
    BorderSkip,
}

/// Cut the `(C_in, P, P)` window centered at the keypoint rounded to the
/// nearest pixel. Keypoints outside the image are an error; keypoints whose
/// window merely crosses the border are a skip.
pub fn extract_patch<T: Real>(
    image: &GrayImage,
    keypoint: PixelPoint,
    cfg: &RefineConfig,
) -> Result<PatchOutcome<T>, NetError> {
    if !keypoint.is_finite()
        || keypoint.x < 0.0
        || keypoint.y < 0.0
        || keypoint.x > (image.width - 1) as f64
        || keypoint.y > (image.height - 1) as f64
    {
        return Err(NetError::KeypointOutsideImage);
    }
    if cfg.use_score_channel && image.scores.is_none() {
        return Err(NetError::MissingScoreChannel);
    }

    let cx = round_half_away(keypoint.x);
    let cy = round_half_away(keypoint.y);
    let half = cfg.patch_half() as i64;
    let side = cfg.input_patch;
    if cx - half < 0
        || cy - half < 0
        || cx + half > (image.width - 1) as i64
        || cy + half > (image.height - 1) as i64
    {
        return Ok(PatchOutcome::BorderSkip);
    }

    let mut out = Tensor::zeros(cfg.in_channels(), side, side);
    let x0 = (cx - half) as usize;
    let y0 = (cy - half) as usize;
    for row in 0..side {
        let src = (y0 + row) * image.width + x0;
        for col in 0..side {
            *out.at_mut(0, row, col) = T::from_f64(image.pixels[src + col]);
        }
        if let Some(scores) = &image.scores {
            if cfg.use_score_channel {
                for col in 0..side {
                    *out.at_mut(1, row, col) = T::from_f64(scores[src + col]);
                }
            }
        }
    }
    Ok(PatchOutcome::Patch(out))
}
