//! Squared symmetric epipolar distance, its gradients, and the truncated
//! training loss built on top of it.
//!
//! For an essential matrix E and normalized homogeneous points n1, n2 the
//! error is
//!
//! ```text
//!            (n2ᵀ E n1)²
//! e = ────────────────────────
//!     a₀² + a₁² + b₀² + b₁²
//! ```
//!
//! with `a = E n1` (the epipolar line of n1 in view 2) and `b = Eᵀ n2` (the
//! line of n2 in view 1). The denominator is the sum of the squared line
//! gradients, which makes `e` a first-order geometric distance in normalized
//! units, squared. It is symmetric in the two views and invariant to scaling
//! E, both of which the tests below pin down.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use nalgebra::{Matrix3, Vector3};

use super::types::{CameraIntrinsics, EssentialMatrix, GeometryError, NormalizedPoint};

/// Everything the loss needs from one epipolar evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EpipolarTerm {
    /// The squared distance e itself.
    pub error: f64,
    /// d(e)/d(n1.x), d(e)/d(n1.y)
    pub grad_n1: [f64; 2],
    /// d(e)/d(n2.x), d(e)/d(n2.y)
    pub grad_n2: [f64; 2],
}

fn numerator_and_lines(
    n1: &NormalizedPoint,
    n2: &NormalizedPoint,
    e: &Matrix3<f64>,
) -> (f64, Vector3<f64>, Vector3<f64>) {
    let x1 = n1.homogeneous();
    let x2 = n2.homogeneous();
    let a = e * x1;
    let b = e.transpose() * x2;
    let s = x2.dot(&a);
    (s, a, b)
}

/// Squared symmetric epipolar distance in normalized coordinates.
///
/// A vanishing denominator means both epipolar lines have zero gradient at
/// the evaluation points; the error is undefined there and this is reported
/// as a hard failure rather than clamped, because a caller that feeds such a
/// configuration has a broken E or degenerate points upstream.
pub fn epipolar_error(
    n1: &NormalizedPoint,
    n2: &NormalizedPoint,
    e: &EssentialMatrix,
) -> Result<f64, GeometryError> {
    let (s, a, b) = numerator_and_lines(n1, n2, e.matrix());
    let denom = a.x * a.x + a.y * a.y + b.x * b.x + b.y * b.y;
    if denom == 0.0 {
        return Err(GeometryError::DegenerateEpipolar);
    }
    let err = s * s / denom;
    if !err.is_finite() {
        return Err(GeometryError::DegenerateEpipolar);
    }
    Ok(err)
}

/// First-order epipolar distance, `sqrt(epipolar_error)`.
pub fn epipolar_distance(
    n1: &NormalizedPoint,
    n2: &NormalizedPoint,
    e: &EssentialMatrix,
) -> Result<f64, GeometryError> {
    epipolar_error(n1, n2, e).map(f64::sqrt)
}

/// Epipolar error together with its gradient in the point coordinates.
///
/// Writing D for the denominator, the quotient rule gives
///
/// ```text
/// de/dn1 = 2 s b / D  -  (s²/D²) · 2 (a₀ E[0,:] + a₁ E[1,:])
/// de/dn2 = 2 s a / D  -  (s²/D²) · 2 (b₀ Eᵀ[0,:] + b₁ Eᵀ[1,:])
/// ```
///
/// restricted to the x and y components, since w is pinned at 1.
pub fn epipolar_error_grad(
    n1: &NormalizedPoint,
    n2: &NormalizedPoint,
    e: &EssentialMatrix,
) -> Result<EpipolarTerm, GeometryError> {
    let m = e.matrix();
    let (s, a, b) = numerator_and_lines(n1, n2, m);
    let denom = a.x * a.x + a.y * a.y + b.x * b.x + b.y * b.y;
    if denom == 0.0 {
        return Err(GeometryError::DegenerateEpipolar);
    }
    let err = s * s / denom;
    if !err.is_finite() {
        return Err(GeometryError::DegenerateEpipolar);
    }

    let mt = m.transpose();
    // d(denom)/dn1 goes through a = E n1 only; b does not depend on n1.
    // Row k of E is d(a_k)/d(n1), so d(a₀²+a₁²)/dn1 = 2(a₀ E[0,:] + a₁ E[1,:]).
    let ddenom_dn1 = 2.0 * (a.x * m.row(0).transpose() + a.y * m.row(1).transpose());
    let ddenom_dn2 = 2.0 * (b.x * mt.row(0).transpose() + b.y * mt.row(1).transpose());
    // d(s)/dn1 = Eᵀ n2 = b and d(s)/dn2 = E n1 = a.
    let coeff = 2.0 * s / denom;
    let ratio = err / denom;
    let g1 = coeff * b - ratio * ddenom_dn1;
    let g2 = coeff * a - ratio * ddenom_dn2;

    let all_finite = g1.x.is_finite() && g1.y.is_finite() && g2.x.is_finite() && g2.y.is_finite();
    if !all_finite {
        return Err(GeometryError::DegenerateEpipolar);
    }

    Ok(EpipolarTerm {
        error: err,
        grad_n1: [g1.x, g1.y],
        grad_n2: [g2.x, g2.y],
    })
}

/// Mean of the four focal lengths of an image pair. This is the pixels-per-
/// normalized-unit conversion factor used for thresholds and for reporting
/// epipolar distances in pixels.
pub fn mean_focal(k1: &CameraIntrinsics, k2: &CameraIntrinsics) -> f64 {
    (k1.fx + k1.fy + k2.fx + k2.fy) / 4.0
}

/// Convert a pixel threshold to normalized coordinates for one image pair.
pub fn normalized_threshold(
    t_px: f64,
    k1: &CameraIntrinsics,
    k2: &CameraIntrinsics,
) -> Result<f64, GeometryError> {
    if !(t_px > 0.0) || !t_px.is_finite() {
        return Err(GeometryError::BadThreshold);
    }
    Ok(t_px / mean_focal(k1, k2))
}

/// One evaluated loss term.
#[derive(Debug, Clone, Copy)]
pub struct LossTerm {
    pub loss: f64,
    /// True when the match fell in the truncated (outlier) branch, where the
    /// loss is constant and the gradient identically zero.
    pub truncated: bool,
    pub grad_n1: [f64; 2],
    pub grad_n2: [f64; 2],
}

/// Truncated epipolar loss for one match.
///
/// Matches whose epipolar distance is strictly below the normalized
/// threshold contribute the squared error; everything else contributes the
/// constant threshold so that gross mismatches cannot drag the optimization.
/// The boundary case `distance == threshold` sits in the constant branch.
pub fn epipolar_loss(
    n1: &NormalizedPoint,
    n2: &NormalizedPoint,
    e: &EssentialMatrix,
    threshold: f64,
) -> Result<(f64, bool), GeometryError> {
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(GeometryError::BadThreshold);
    }
    let err = epipolar_error(n1, n2, e)?;
    if err.sqrt() < threshold {
        Ok((err, false))
    } else {
        Ok((threshold, true))
    }
}

/// Truncated epipolar loss with gradients. In the truncated branch the
/// gradients are exactly zero, not merely small.
pub fn epipolar_loss_grad(
    n1: &NormalizedPoint,
    n2: &NormalizedPoint,
    e: &EssentialMatrix,
    threshold: f64,
) -> Result<LossTerm, GeometryError> {
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(GeometryError::BadThreshold);
    }
    let term = epipolar_error_grad(n1, n2, e)?;
    if term.error.sqrt() < threshold {
        Ok(LossTerm {
            loss: term.error,
            truncated: false,
            grad_n1: term.grad_n1,
            grad_n2: term.grad_n2,
        })
    } else {
        Ok(LossTerm {
            loss: threshold,
            truncated: true,
            grad_n1: [0.0; 2],
            grad_n2: [0.0; 2],
        })
    }
}
