//! Camera pair and 3D point sampling.
//!
//! A pair is two pinhole cameras related by a bounded random rotation and a
//! unit-norm translation, with one focal length per camera drawn from the
//! configured range. Points live in the camera-1 frame and are rejection
//! sampled until they project inside both images with positive depth.

use alloc::vec::Vec;

use nalgebra::{Rotation3, Unit, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::geometry::{CameraIntrinsics, PixelPoint, RelativePose};
use crate::rng::{stream_rng, Stream};
use crate::synth::{SceneConfig, SynthError};

/// Scene depth interval in camera-1 units. The translation has unit norm, so
/// depths of a few baseline lengths give visible parallax without letting
/// points escape the second frustum too often.
pub const DEPTH_RANGE: (f64, f64) = (4.0, 10.0);

/// Attempts allowed per rejection-sampled quantity before giving up.
pub const RETRY_BUDGET: u32 = 1000;

/// Shared camera geometry for every correspondence of one image pair.
#[derive(Debug, Clone)]
pub struct PairGeometry {
    pub pose: RelativePose,
    pub k1: CameraIntrinsics,
    pub k2: CameraIntrinsics,
}

/// Distance a sampled pixel must keep from the image edge so that the patch
/// window survives quantization, keypoint jitter, and rounding.
pub fn border_margin(cfg: &SceneConfig) -> f64 {
    (cfg.patch_size / 2) as f64 + 2.0 + cfg.keypoint_jitter
}

/// Draws the pose and intrinsics for pair `pair_index`. Pure in
/// `(cfg.seed, pair_index)`.
pub fn sample_pair_geometry(cfg: &SceneConfig, pair_index: u64) -> Result<PairGeometry, SynthError> {
    let mut rng = stream_rng(cfg.seed, Stream::PairGeometry, pair_index);

    let f1 = rng.gen_range(cfg.focal_range.0..=cfg.focal_range.1);
    let f2 = rng.gen_range(cfg.focal_range.0..=cfg.focal_range.1);
    let cx = f64::from(cfg.image_size.0) / 2.0;
    let cy = f64::from(cfg.image_size.1) / 2.0;
    let k1 = CameraIntrinsics::new(f1, f1, cx, cy)?;
    let k2 = CameraIntrinsics::new(f2, f2, cx, cy)?;

    let axis: [f64; 3] = UnitSphere.sample(&mut rng);
    let angle = rng.gen_range(0.0..=cfg.max_rotation_deg).to_radians();
    let rotation = Rotation3::from_axis_angle(&Unit::new_unchecked(Vector3::from(axis)), angle);

    let t: [f64; 3] = UnitSphere.sample(&mut rng);
    let pose = RelativePose::new(*rotation.matrix(), Vector3::from(t))?;

    Ok(PairGeometry { pose, k1, k2 })
}

/// One accepted scene point: camera-1 coordinates plus its exact sub-pixel
/// projections in both views.
#[derive(Debug, Clone, Copy)]
pub struct ScenePoint {
    pub x: Vector3<f64>,
    pub true1: PixelPoint,
    pub true2: PixelPoint,
}

/// Rejection samples a point visible in both views, at least `border_margin`
/// pixels from every image edge. Fails once the retry budget runs out, which
/// flags configurations whose frustums barely overlap.
pub fn sample_point(
    cfg: &SceneConfig,
    geom: &PairGeometry,
    rng: &mut ChaCha8Rng,
) -> Result<ScenePoint, SynthError> {
    let margin = border_margin(cfg);
    let (w, h) = (f64::from(cfg.image_size.0), f64::from(cfg.image_size.1));
    let (x_lo, x_hi) = (margin, w - 1.0 - margin);
    let (y_lo, y_hi) = (margin, h - 1.0 - margin);

    for _ in 0..RETRY_BUDGET {
        let px = rng.gen_range(x_lo..=x_hi);
        let py = rng.gen_range(y_lo..=y_hi);
        let z = rng.gen_range(DEPTH_RANGE.0..=DEPTH_RANGE.1);

        let x = Vector3::new(
            z * (px - geom.k1.cx) / geom.k1.fx,
            z * (py - geom.k1.cy) / geom.k1.fy,
            z,
        );
        let true1 = PixelPoint::new(px, py);

        let x2 = geom.pose.transform(&x);
        let Some(true2) = geom.k2.project(&x2) else {
            continue;
        };
        let inside = true2.x >= x_lo && true2.x <= x_hi && true2.y >= y_lo && true2.y <= y_hi;
        if inside {
            return Ok(ScenePoint { x, true1, true2 });
        }
    }
    Err(SynthError::RetryBudget(RETRY_BUDGET))
}

/// Samples a full image pair: pose, intrinsics, and `cfg.num_points` scene
/// points. Each point draws from its own per-record stream, so any single
/// correspondence can be regenerated without the rest of the pair.
pub fn sample_two_view(
    cfg: &SceneConfig,
    index: u64,
) -> Result<(RelativePose, (CameraIntrinsics, CameraIntrinsics), Vec<Vector3<f64>>), SynthError> {
    cfg.validate()?;
    let geom = sample_pair_geometry(cfg, index)?;
    let mut points = Vec::with_capacity(cfg.num_points);
    for j in 0..cfg.num_points as u64 {
        let sample_id = index * cfg.num_points as u64 + j;
        let mut rng = stream_rng(cfg.seed, Stream::Point, sample_id);
        points.push(sample_point(cfg, &geom, &mut rng)?.x);
    }
    Ok((geom.pose, (geom.k1, geom.k2), points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;

    #[test]
    fn zero_rotation_gives_identity() {
        let cfg = SceneConfig {
            max_rotation_deg: 0.0,
            ..SceneConfig::default()
        };
        for index in 0..5 {
            let geom = sample_pair_geometry(&cfg, index).unwrap();
            assert_abs_diff_eq!(geom.pose.rotation, Matrix3::identity(), epsilon = 1e-12);
            assert_abs_diff_eq!(geom.pose.translation.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rotation_angle_respects_bound() {
        let cfg = SceneConfig {
            max_rotation_deg: 7.0,
            ..SceneConfig::default()
        };
        for index in 0..20 {
            let geom = sample_pair_geometry(&cfg, index).unwrap();
            let angle = ((geom.pose.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
            assert!(angle.to_degrees() <= 7.0 + 1e-9);
        }
    }

    #[test]
    fn points_visible_in_both_views() {
        let cfg = SceneConfig::default();
        let (pose, (k1, k2), points) = sample_two_view(&cfg, 3).unwrap();
        let margin = border_margin(&cfg);
        assert_eq!(points.len(), cfg.num_points);
        for x in &points {
            assert!(x.z > 0.0);
            let x2 = pose.transform(x);
            assert!(x2.z > 0.0);
            for (k, p) in [(k1, x), (k2, &x2)] {
                let pix = k.project(p).unwrap();
                assert!(pix.x >= margin && pix.x <= f64::from(cfg.image_size.0 - 1) - margin);
                assert!(pix.y >= margin && pix.y <= f64::from(cfg.image_size.1 - 1) - margin);
            }
        }
    }

    #[test]
    fn same_seed_and_index_bit_identical() {
        let cfg = SceneConfig::default();
        let (pose_a, (k1a, k2a), pts_a) = sample_two_view(&cfg, 11).unwrap();
        let (pose_b, (k1b, k2b), pts_b) = sample_two_view(&cfg, 11).unwrap();
        assert_eq!(pose_a.rotation, pose_b.rotation);
        assert_eq!(pose_a.translation, pose_b.translation);
        assert_eq!((k1a.fx, k2a.fx), (k1b.fx, k2b.fx));
        for (a, b) in pts_a.iter().zip(&pts_b) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
            assert_eq!(a.z.to_bits(), b.z.to_bits());
        }
    }

    #[test]
    fn hopeless_frustum_overlap_exhausts_budget() {
        // A focal length of 1e5 pixels shrinks the field of view to a few
        // hundredths of a degree; a unit baseline then almost surely throws
        // every view-1 point far outside view 2.
        let cfg = SceneConfig {
            focal_range: (1.0e5, 1.0e5),
            ..SceneConfig::default()
        };
        let geom = sample_pair_geometry(&cfg, 0).unwrap();
        let mut rng = stream_rng(cfg.seed, Stream::Point, 0);
        match sample_point(&cfg, &geom, &mut rng) {
            Err(SynthError::RetryBudget(_)) => {}
            other => panic!("expected retry budget exhaustion, got {other:?}"),
        }
    }
}
