//! Recovering a relative pose from an essential matrix, and angular error
//! metrics between poses.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec::Vec;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use super::types::{Correspondence, EssentialMatrix, GeometryError, RelativePose};

/// The four candidate (R, t) factorizations of an essential matrix.
fn candidates(e: &EssentialMatrix) -> Result<[RelativePose; 4], GeometryError> {
    let svd = e.matrix().svd(true, true);
    let mut u = svd.u.ok_or(GeometryError::ZeroEssential)?;
    let mut vt = svd.v_t.ok_or(GeometryError::ZeroEssential)?;
    if svd.singular_values[0] < 1e-300 {
        return Err(GeometryError::ZeroEssential);
    }
    // Force both factors into SO(3) so the products below are rotations.
    if u.determinant() < 0.0 {
        u = -u;
    }
    if vt.determinant() < 0.0 {
        vt = -vt;
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = u * w * vt;
    let r2 = u * w.transpose() * vt;
    let t = u.column(2).into_owned();

    Ok([
        RelativePose::new(r1, t)?,
        RelativePose::new(r1, -t)?,
        RelativePose::new(r2, t)?,
        RelativePose::new(r2, -t)?,
    ])
}

/// Triangulated depths of one correspondence under a candidate pose.
///
/// With unit-scale translation the two rays must satisfy
/// `z1 · R x1 - z2 · x2 = -t`. That is an overdetermined 3x2 system in the
/// depths; solve its normal equations in closed form.
fn depths(pose: &RelativePose, c: &Correspondence) -> Option<(f64, f64)> {
    let rx1 = pose.rotation * c.n1.homogeneous();
    let x2 = c.n2.homogeneous();
    let t = &pose.translation;

    let a00 = rx1.dot(&rx1);
    let a01 = -rx1.dot(&x2);
    let a11 = x2.dot(&x2);
    let b0 = -rx1.dot(t);
    let b1 = x2.dot(t);

    let m = Matrix2::new(a00, a01, a01, a11);
    let rhs = Vector2::new(b0, b1);
    let det = m.determinant();
    if det.abs() < 1e-15 {
        // Rays are parallel; the point is at infinity or the match is the
        // epipole itself. No usable vote either way.
        return None;
    }
    let z = m.try_inverse()? * rhs;
    Some((z.x, z.y))
}

/// Pick the (R, t) candidate with the most points in front of both cameras.
///
/// Ties and empty votes mean the supports do not determine the camera
/// arrangement, which callers must treat as a failed estimate rather than
/// picking a candidate arbitrarily.
pub fn decompose_essential(
    e: &EssentialMatrix,
    supports: &[Correspondence],
) -> Result<RelativePose, GeometryError> {
    if supports.is_empty() {
        return Err(GeometryError::NoSupports);
    }
    let cands = candidates(e)?;
    let votes: Vec<usize> = cands
        .iter()
        .map(|pose| {
            supports
                .iter()
                .filter_map(|c| depths(pose, c))
                .filter(|&(z1, z2)| z1 > 0.0 && z2 > 0.0)
                .count()
        })
        .collect();

    let best = (0..4).max_by_key(|&i| votes[i]).expect("four candidates");
    let top = votes[best];
    if top == 0 || votes.iter().filter(|&&v| v == top).count() > 1 {
        return Err(GeometryError::AmbiguousCheirality);
    }
    Ok(cands[best].clone())
}

/// Angle of the relative rotation between two rotation matrices, in degrees.
pub fn rotation_error_deg(r_est: &Matrix3<f64>, r_true: &Matrix3<f64>) -> f64 {
    let rel = r_est.transpose() * r_true;
    let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    cos.acos().to_degrees()
}

/// Angle between two translation directions in degrees, ignoring sign.
/// Two-view geometry cannot distinguish t from -t without cheirality, and
/// the error metric should not punish an estimator for that.
pub fn translation_error_deg(t_est: &Vector3<f64>, t_true: &Vector3<f64>) -> f64 {
    let denom = t_est.norm() * t_true.norm();
    if denom < 1e-300 {
        return 180.0;
    }
    let cos = (t_est.dot(t_true) / denom).abs().clamp(0.0, 1.0);
    cos.acos().to_degrees()
}

/// Pose error: the worse of the rotation and translation angles.
pub fn pose_error(est: &RelativePose, truth: &RelativePose) -> f64 {
    let r = rotation_error_deg(&est.rotation, &truth.rotation);
    let t = translation_error_deg(&est.translation, &truth.translation);
    r.max(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::types::{CameraIntrinsics, PixelPoint};
    use nalgebra::Rotation3;

    fn synthetic_supports(pose: &RelativePose, n: usize) -> Vec<Correspondence> {
        // Deterministic grid of 3D points in front of camera 1, projected
        // into both views with a plain identity-like camera.
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        let mut out = Vec::new();
        let mut i = 0usize;
        while out.len() < n {
            let gx = (i % 7) as f64 - 3.0;
            let gy = ((i / 7) % 7) as f64 - 3.0;
            let gz = 5.0 + (i % 5) as f64;
            i += 1;
            let x1 = Vector3::new(gx * 0.4, gy * 0.4, gz);
            let x2 = pose.transform(&x1);
            let (Some(p1), Some(p2)) = (k.project(&x1), k.project(&x2)) else {
                continue;
            };
            out.push(Correspondence::new(p1, p2, &k, &k).unwrap());
        }
        out
    }

    #[test]
    fn recovers_pose_from_its_own_essential() {
        let pose = RelativePose::new(
            Rotation3::from_euler_angles(0.05, -0.08, 0.03).into_inner(),
            Vector3::new(0.6, -0.2, 0.1),
        )
        .unwrap();
        let e = EssentialMatrix::from_pose(&pose);
        let supports = synthetic_supports(&pose, 30);
        let recovered = decompose_essential(&e, &supports).unwrap();
        assert!(pose_error(&recovered, &pose) < 1e-6);
    }

    #[test]
    fn recovers_pose_with_dominant_forward_motion() {
        let pose = RelativePose::new(
            Rotation3::from_euler_angles(-0.02, 0.04, 0.01).into_inner(),
            Vector3::new(0.05, 0.02, 1.0),
        )
        .unwrap();
        let e = EssentialMatrix::from_pose(&pose);
        let supports = synthetic_supports(&pose, 30);
        let recovered = decompose_essential(&e, &supports).unwrap();
        assert!(pose_error(&recovered, &pose) < 1e-6);
    }

    #[test]
    fn scaled_essential_decomposes_to_the_same_pose() {
        let pose = RelativePose::new(
            Rotation3::from_euler_angles(0.05, -0.08, 0.03).into_inner(),
            Vector3::new(0.6, -0.2, 0.1),
        )
        .unwrap();
        let e = EssentialMatrix::from_pose(&pose);
        let scaled = EssentialMatrix::from_matrix_unchecked(e.matrix() * -3.0);
        let supports = synthetic_supports(&pose, 20);
        let a = decompose_essential(&e, &supports).unwrap();
        let b = decompose_essential(&scaled, &supports).unwrap();
        assert!(pose_error(&a, &b) < 1e-9);
    }

    #[test]
    fn pose_error_is_symmetric() {
        let a = RelativePose::new(
            Rotation3::from_euler_angles(0.1, -0.2, 0.05).into_inner(),
            Vector3::new(0.3, 0.5, -0.2),
        )
        .unwrap();
        let b = RelativePose::new(
            Rotation3::from_euler_angles(-0.05, 0.12, 0.2).into_inner(),
            Vector3::new(-0.1, 0.4, 0.9),
        )
        .unwrap();
        assert!((pose_error(&a, &b) - pose_error(&b, &a)).abs() < 1e-9);
    }

    #[test]
    fn no_supports_is_an_error() {
        let pose = RelativePose::new(Matrix3::identity(), Vector3::x()).unwrap();
        let e = EssentialMatrix::from_pose(&pose);
        assert_eq!(
            decompose_essential(&e, &[]).unwrap_err(),
            GeometryError::NoSupports
        );
    }

    #[test]
    fn single_epipole_match_is_ambiguous() {
        // A correspondence sitting exactly on the epipole gives parallel
        // rays in every candidate, so all votes are zero.
        let pose = RelativePose::new(Matrix3::identity(), Vector3::z()).unwrap();
        let e = EssentialMatrix::from_pose(&pose);
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        let c = Correspondence::new(
            PixelPoint::new(320.0, 240.0),
            PixelPoint::new(320.0, 240.0),
            &k,
            &k,
        )
        .unwrap();
        assert_eq!(
            decompose_essential(&e, &[c]).unwrap_err(),
            GeometryError::AmbiguousCheirality
        );
    }

    #[test]
    fn rotation_error_of_known_angle() {
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), 0.25).into_inner();
        let err = rotation_error_deg(&Matrix3::identity(), &r);
        assert!((err - 0.25f64.to_degrees()).abs() < 1e-9);
    }

    #[test]
    fn translation_error_ignores_sign_and_scale() {
        let a = Vector3::new(1.0, 0.0, 0.0);
        let b = Vector3::new(-5.0, 0.0, 0.0);
        assert!(translation_error_deg(&a, &b) < 1e-12);
        let c = Vector3::new(0.0, 3.0, 0.0);
        assert!((translation_error_deg(&a, &c) - 90.0).abs() < 1e-9);
    }

    #[test]
    fn pose_error_takes_the_worse_angle() {
        let truth = RelativePose::new(Matrix3::identity(), Vector3::x()).unwrap();
        let est = RelativePose::new(
            Rotation3::from_axis_angle(&Vector3::z_axis(), 0.02).into_inner(),
            Vector3::new(1.0, 0.3, 0.0),
        )
        .unwrap();
        let r = rotation_error_deg(&est.rotation, &truth.rotation);
        let t = translation_error_deg(&est.translation, &truth.translation);
        assert!(t > r);
        assert_eq!(pose_error(&est, &truth), t);
    }
}
