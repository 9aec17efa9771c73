//! Geometric domain types and their validity rules.

use nalgebra::{Matrix3, Vector3};
use num_traits::Float;

/// Errors from geometric construction and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("focal lengths must be positive and finite")]
    BadIntrinsics,
    #[error("rotation is not special orthogonal within tolerance")]
    BadRotation,
    #[error("translation is too close to zero to normalize")]
    ZeroTranslation,
    #[error("epipolar denominator vanished; both epipolar line gradients are zero")]
    DegenerateEpipolar,
    #[error("matrix is numerically zero, cannot project to an essential matrix")]
    ZeroEssential,
    #[error("threshold must be positive")]
    BadThreshold,
    #[error("no decomposition candidate wins the positive-depth vote outright")]
    AmbiguousCheirality,
    #[error("at least one support correspondence is required")]
    NoSupports,
    #[error("error list is empty")]
    EmptyErrors,
}

/// A real-valued image location in pixels. Sub-pixel coordinates are the
/// point of this whole exercise, so nothing here is ever rounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A pixel point pushed through camera intrinsics, in homogeneous form.
/// `w` is always exactly 1 after construction; it is stored anyway so the
/// epipolar algebra below reads like the formulas it implements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedPoint {
    pub x: f64,
    pub y: f64,
    pub w: f64,
}

impl NormalizedPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y, w: 1.0 }
    }

    pub fn homogeneous(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.w)
    }
}

/// Pinhole intrinsics. No distortion model; the synthetic pipeline is
/// distortion-free by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        let all_finite = fx.is_finite() && fy.is_finite() && cx.is_finite() && cy.is_finite();
        if !all_finite || fx <= 0.0 || fy <= 0.0 {
            return Err(GeometryError::BadIntrinsics);
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Pixel coordinates to normalized camera coordinates.
    pub fn normalize(&self, p: PixelPoint) -> Result<NormalizedPoint, GeometryError> {
        if !p.is_finite() {
            return Err(GeometryError::NonFinite("pixel point"));
        }
        Ok(NormalizedPoint::new(
            (p.x - self.cx) / self.fx,
            (p.y - self.cy) / self.fy,
        ))
    }

    /// Project a camera-frame 3D point. `None` when the point does not lie
    /// strictly in front of the camera.
    pub fn project(&self, x: &Vector3<f64>) -> Option<PixelPoint> {
        if x.z <= 0.0 {
            return None;
        }
        Some(PixelPoint::new(
            self.fx * x.x / x.z + self.cx,
            self.fy * x.y / x.z + self.cy,
        ))
    }
}

/// Rigid transform taking camera-1 coordinates to camera-2 coordinates,
/// `X2 = R · X1 + t`. Translation is kept at unit norm; two-view geometry
/// cannot observe its scale anyway.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativePose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RelativePose {
    /// Validates the rotation and normalizes the translation. A translation
    /// shorter than 1e-12 is rejected rather than normalized into noise.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if rotation.iter().any(|v| !v.is_finite()) || translation.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("pose"));
        }
        let orth = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if orth > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(GeometryError::BadRotation);
        }
        let n = translation.norm();
        if n < 1e-12 {
            return Err(GeometryError::ZeroTranslation);
        }
        Ok(Self {
            rotation,
            translation: translation / n,
        })
    }

    pub fn transform(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }
}

/// The essential matrix. Defined only up to nonzero scale; the stored matrix
/// is whatever scale its constructor produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EssentialMatrix {
    m: Matrix3<f64>,
}

impl EssentialMatrix {
    /// `E = [t]× · R` for the crate's pose convention. The result has
    /// singular values (1, 1, 0) exactly up to roundoff.
    pub fn from_pose(pose: &RelativePose) -> Self {
        Self {
            m: skew(&pose.translation) * pose.rotation,
        }
    }

    /// Project an arbitrary 3x3 matrix onto the essential manifold: replace
    /// the singular values by (s, s, 0) with s the mean of the top two.
    pub fn project(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("essential candidate"));
        }
        let svd = m.svd(true, true);
        let s = (svd.singular_values[0] + svd.singular_values[1]) / 2.0;
        if s < 1e-300 {
            return Err(GeometryError::ZeroEssential);
        }
        let u = svd.u.ok_or(GeometryError::ZeroEssential)?;
        let vt = svd.v_t.ok_or(GeometryError::ZeroEssential)?;
        let sigma = Matrix3::from_diagonal(&Vector3::new(s, s, 0.0));
        Ok(Self { m: u * sigma * vt })
    }

    /// Wrap a matrix that is already known to be essential (deserialized
    /// ground truth, scaled test fixtures). No validation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self { m }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Scale-free canonical form for comparisons: unit Frobenius norm with
    /// the sign fixed so the entry of largest magnitude is positive.
    pub fn comparison_form(&self) -> Matrix3<f64> {
        let n = self.m.norm();
        let mut c = self.m / n;
        let mut pivot = 0.0f64;
        for v in c.iter() {
            if Float::abs(*v) > Float::abs(pivot) {
                pivot = *v;
            }
        }
        if pivot < 0.0 {
            c = -c;
        }
        c
    }
}

/// Cross-product matrix: `skew(t) · v == t × v`.
pub(crate) fn skew(t: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -t.z, t.y, //
        t.z, 0.0, -t.x, //
        -t.y, t.x, 0.0,
    )
}

/// One match between the two views, in both pixel and normalized form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub p1: PixelPoint,
    pub p2: PixelPoint,
    pub n1: NormalizedPoint,
    pub n2: NormalizedPoint,
}

impl Correspondence {
    pub fn new(
        p1: PixelPoint,
        p2: PixelPoint,
        k1: &CameraIntrinsics,
        k2: &CameraIntrinsics,
    ) -> Result<Self, GeometryError> {
        Ok(Self {
            p1,
            p2,
            n1: k1.normalize(p1)?,
            n2: k2.normalize(p2)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_point_maps_to_origin() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        let n = k.normalize(PixelPoint::new(320.0, 240.0)).unwrap();
        assert_eq!((n.x, n.y, n.w), (0.0, 0.0, 1.0));
    }

    #[test]
    fn one_focal_length_offset() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        let n = k.normalize(PixelPoint::new(820.0, 240.0)).unwrap();
        assert_eq!((n.x, n.y, n.w), (1.0, 0.0, 1.0));
    }

    #[test]
    fn split_focal_arithmetic() {
        let k = CameraIntrinsics::new(400.0, 600.0, 0.0, 0.0).unwrap();
        let n = k.normalize(PixelPoint::new(200.0, 300.0)).unwrap();
        assert_eq!((n.x, n.y, n.w), (0.5, 0.5, 1.0));
    }

    #[test]
    fn normalize_rejects_non_finite() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        assert!(k.normalize(PixelPoint::new(f64::NAN, 0.0)).is_err());
        assert!(k.normalize(PixelPoint::new(0.0, f64::INFINITY)).is_err());
    }

    #[test]
    fn intrinsics_reject_bad_focals() {
        assert!(CameraIntrinsics::new(0.0, 500.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(500.0, -1.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(f64::NAN, 500.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn pose_normalizes_translation() {
        let pose = RelativePose::new(Matrix3::identity(), Vector3::new(3.0, 0.0, 4.0)).unwrap();
        assert!((pose.translation.norm() - 1.0).abs() < 1e-15);
        assert!((pose.translation.x - 0.6).abs() < 1e-15);
    }

    #[test]
    fn pose_rejects_zero_translation_and_bad_rotation() {
        assert_eq!(
            RelativePose::new(Matrix3::identity(), Vector3::zeros()).unwrap_err(),
            GeometryError::ZeroTranslation
        );
        let reflection = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert_eq!(
            RelativePose::new(reflection, Vector3::x()).unwrap_err(),
            GeometryError::BadRotation
        );
    }

    #[test]
    fn essential_of_x_translation_is_cross_matrix() {
        let pose = RelativePose::new(Matrix3::identity(), Vector3::x()).unwrap();
        let e = EssentialMatrix::from_pose(&pose);
        let expected = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_eq!(e.matrix(), &expected);
    }

    #[test]
    fn essential_of_z_translation_is_cross_matrix() {
        let pose = RelativePose::new(Matrix3::identity(), Vector3::z()).unwrap();
        let e = EssentialMatrix::from_pose(&pose);
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(e.matrix(), &expected);
    }

    #[test]
    fn projection_keeps_rank_two_shape() {
        let m = Matrix3::new(1.0, 0.2, -0.3, 0.1, 0.9, 0.4, -0.2, 0.3, 1.1);
        let e = EssentialMatrix::project(m).unwrap();
        let sv = e.matrix().svd(false, false).singular_values;
        assert!((sv[0] - sv[1]).abs() / sv[0] < 1e-10);
        assert!(sv[2] / sv[0] < 1e-12);
    }

    #[test]
    fn comparison_form_is_scale_and_sign_free() {
        let pose = RelativePose::new(Matrix3::identity(), Vector3::new(0.3, -0.5, 0.8)).unwrap();
        let e = EssentialMatrix::from_pose(&pose);
        let scaled = EssentialMatrix::from_matrix_unchecked(e.matrix() * -17.0);
        assert!((e.comparison_form() - scaled.comparison_form()).norm() < 1e-14);
    }
}
