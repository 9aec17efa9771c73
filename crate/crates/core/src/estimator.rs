//! Robust essential-matrix estimation from correspondences.
//!
//! A plain seeded RANSAC loop: uniform eight-point hypotheses scored by a
//! truncated quadratic (MSAC), one least-squares refit on the winner's
//! inliers, then cheirality-voted decomposition into a relative pose. Each
//! iteration draws from its own counter-derived stream, so the estimate is a
//! pure function of (correspondences, intrinsics, config) and hypothesis
//! evaluation could be parallelized without changing any result.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec::Vec;

use nalgebra::{Matrix3, SMatrix, SVector};
use rand::Rng;

use crate::geometry::{
    decompose_essential, epipolar_error, normalized_threshold, CameraIntrinsics, Correspondence,
    EssentialMatrix, GeometryError, RelativePose,
};
use crate::rng::{stream_rng, Stream};

/// Inlier margin as a multiple of the base threshold. The truncation point
/// of the MSAC score and the inlier decision both sit at this radius.
pub const MSAC_MARGIN_FACTOR: f64 = 1.5;

/// Ratio below which the second-smallest eigenvalue of the constraint
/// normal matrix signals a solution space of dimension two or more, meaning
/// the sample cannot pin down a single essential matrix.
const DEGENERACY_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EstimatorError {
    #[error("invalid estimator config: {0}")]
    Config(&'static str),
    #[error("need at least {need} correspondences, got {got}")]
    TooFewCorrespondences { got: usize, need: usize },
    #[error("degenerate correspondence configuration")]
    Degenerate,
    #[error("no hypothesis reached the minimum inlier support")]
    EstimationFailed,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Knobs for the RANSAC loop. The pixel threshold is converted per pair via
/// the same focal normalization the training loss uses.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default, deny_unknown_fields)
)]
pub struct RansacConfig {
    pub threshold_px: f64,
    /// Fixed at [`MSAC_MARGIN_FACTOR`]; present so config files show the
    /// value, rejected if set to anything else.
    pub msac_margin_factor: f64,
    pub iterations: u64,
    pub seed: u64,
    pub min_sample: usize,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            threshold_px: 1.0,
            msac_margin_factor: MSAC_MARGIN_FACTOR,
            iterations: 1000,
            seed: 7,
            min_sample: 8,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        if !(self.threshold_px > 0.0) || !self.threshold_px.is_finite() {
            return Err(EstimatorError::Config("threshold_px must be positive"));
        }
        if self.msac_margin_factor != MSAC_MARGIN_FACTOR {
            return Err(EstimatorError::Config("msac_margin_factor is fixed at 1.5"));
        }
        if self.iterations == 0 {
            return Err(EstimatorError::Config("iterations must be at least 1"));
        }
        if self.min_sample < 8 {
            return Err(EstimatorError::Config(
                "min_sample cannot be below the eight-point minimum",
            ));
        }
        Ok(())
    }
}

/// Outcome of a successful estimation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub e: EssentialMatrix,
    /// Inlier flag per input correspondence, in input order.
    pub inliers: Vec<bool>,
    pub inlier_ratio: f64,
    pub pose: RelativePose,
}

/// Similarity taking one view's points to zero centroid and mean distance
/// sqrt(2) from it. Returned as (scale, center); the matrix form is
/// `[[s, 0, -s*cx], [0, s, -s*cy], [0, 0, 1]]`.
fn conditioning(points: impl Iterator<Item = (f64, f64)> + Clone) -> Option<(f64, f64, f64)> {
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut n = 0usize;
    for (x, y) in points.clone() {
        cx += x;
        cy += y;
        n += 1;
    }
    let (cx, cy) = (cx / n as f64, cy / n as f64);
    let mut mean_dist = 0.0;
    for (x, y) in points {
        let (dx, dy) = (x - cx, y - cy);
        mean_dist += (dx * dx + dy * dy).sqrt();
    }
    mean_dist /= n as f64;
    if mean_dist < 1e-12 {
        return None;
    }
    Some((core::f64::consts::SQRT_2 / mean_dist, cx, cy))
}

/// Least-squares essential matrix from eight or more correspondences.
///
/// The classic conditioned linear solve: each view's points are centered
/// and scaled so the homogeneous column stops dominating the constraint
/// rows, the flattened matrix is the eigenvector for the smallest
/// eigenvalue of the accumulated normal matrix, the result is mapped back
/// to camera coordinates and projected onto the essential manifold.
/// Conditioning matters even for K-normalized inputs: their coordinates
/// are a few tenths while the constant column is 1, and that imbalance
/// costs real accuracy on noisy data.
pub fn eight_point(correspondences: &[Correspondence]) -> Result<EssentialMatrix, EstimatorError> {
    if correspondences.len() < 8 {
        return Err(EstimatorError::TooFewCorrespondences {
            got: correspondences.len(),
            need: 8,
        });
    }
    let Some((s1, cx1, cy1)) =
        conditioning(correspondences.iter().map(|c| (c.n1.x, c.n1.y)))
    else {
        return Err(EstimatorError::Degenerate);
    };
    let Some((s2, cx2, cy2)) =
        conditioning(correspondences.iter().map(|c| (c.n2.x, c.n2.y)))
    else {
        return Err(EstimatorError::Degenerate);
    };

    let mut ata = SMatrix::<f64, 9, 9>::zeros();
    for c in correspondences {
        let (x1, y1) = (s1 * (c.n1.x - cx1), s1 * (c.n1.y - cy1));
        let (x2, y2) = (s2 * (c.n2.x - cx2), s2 * (c.n2.y - cy2));
        let row = SVector::<f64, 9>::from_column_slice(&[
            x2 * x1,
            x2 * y1,
            x2,
            y2 * x1,
            y2 * y1,
            y2,
            x1,
            y1,
            1.0,
        ]);
        ata += row * row.transpose();
    }

    let eig = ata.symmetric_eigen();
    // The decomposition does not promise any eigenvalue order.
    let mut order: [usize; 9] = [0, 1, 2, 3, 4, 5, 6, 7, 8];
    order.sort_unstable_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("eigenvalues of a real symmetric matrix are finite")
    });
    let largest = eig.eigenvalues[order[8]];
    // A second near-zero eigenvalue means a whole plane of matrices fits the
    // constraints equally well; coincident or otherwise rank-deficient
    // samples land here.
    if eig.eigenvalues[order[1]] <= DEGENERACY_RATIO * largest {
        return Err(EstimatorError::Degenerate);
    }
    let v = eig.eigenvectors.column(order[0]);
    let cond = Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);

    // Undo the conditioning, then project. Projection must happen in camera
    // coordinates or the similarity transforms would wreck the singular
    // value structure it just imposed.
    let t1 = Matrix3::new(s1, 0.0, -s1 * cx1, 0.0, s1, -s1 * cy1, 0.0, 0.0, 1.0);
    let t2 = Matrix3::new(s2, 0.0, -s2 * cx2, 0.0, s2, -s2 * cy2, 0.0, 0.0, 1.0);
    let m = t2.transpose() * cond * t1;
    Ok(EssentialMatrix::project(m)?)
}

/// Truncated quadratic score of a hypothesis over all correspondences,
/// lower is better, together with the inlier flags.
///
/// Each match contributes its epipolar error clamped at the squared margin.
/// A match whose epipolar denominator vanishes gives no usable distance, so
/// it counts as a clamped outlier rather than poisoning the whole score.
pub fn msac_score(
    e: &EssentialMatrix,
    correspondences: &[Correspondence],
    t_norm: f64,
) -> Result<(f64, Vec<bool>), EstimatorError> {
    if !(t_norm > 0.0) || !t_norm.is_finite() {
        return Err(EstimatorError::Config("t_norm must be positive"));
    }
    let margin_sq = (MSAC_MARGIN_FACTOR * t_norm) * (MSAC_MARGIN_FACTOR * t_norm);
    let mut score = 0.0;
    let mut inliers = Vec::with_capacity(correspondences.len());
    for c in correspondences {
        match epipolar_error(&c.n1, &c.n2, e) {
            Ok(err) if err < margin_sq => {
                score += err;
                inliers.push(true);
            }
            Ok(_) => {
                score += margin_sq;
                inliers.push(false);
            }
            Err(GeometryError::DegenerateEpipolar) => {
                score += margin_sq;
                inliers.push(false);
            }
            Err(other) => return Err(other.into()),
        }
    }
    Ok((score, inliers))
}

/// Draw `count` distinct indices below `n` from the iteration's stream.
fn sample_indices(rng: &mut impl Rng, n: usize, count: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    while chosen.len() < count {
        let j = rng.gen_range(0..n as u64) as usize;
        if !chosen.contains(&j) {
            chosen.push(j);
        }
    }
    chosen
}

/// Seeded RANSAC estimate of the relative pose behind a set of matches.
///
/// Runs the configured number of eight-point hypotheses on uniform minimal
/// samples, keeps the best MSAC score (ties go to the earlier iteration),
/// refits on the winner's inliers, and decomposes the refit model with
/// cheirality voting restricted to its own inliers. Any outcome without the
/// minimum inlier support is an estimation failure; callers score that as a
/// maximally wrong pose rather than unwinding their pipeline.
pub fn estimate_relative_pose(
    correspondences: &[Correspondence],
    k1: &CameraIntrinsics,
    k2: &CameraIntrinsics,
    cfg: &RansacConfig,
) -> Result<EstimationResult, EstimatorError> {
    cfg.validate()?;
    let n = correspondences.len();
    if n < cfg.min_sample {
        return Err(EstimatorError::TooFewCorrespondences {
            got: n,
            need: cfg.min_sample,
        });
    }
    let t_norm = normalized_threshold(cfg.threshold_px, k1, k2)?;

    let mut best: Option<(f64, EssentialMatrix, Vec<bool>)> = None;
    let mut sample = Vec::with_capacity(cfg.min_sample);
    for iter in 0..cfg.iterations {
        let mut rng = stream_rng(cfg.seed, Stream::RansacIteration, iter);
        let indices = sample_indices(&mut rng, n, cfg.min_sample);
        sample.clear();
        sample.extend(indices.iter().map(|&i| correspondences[i]));
        let hyp = match eight_point(&sample) {
            Ok(e) => e,
            // A flat or repetitive sample fits no single model; the next
            // iteration draws a different one.
            Err(EstimatorError::Degenerate) | Err(EstimatorError::Geometry(_)) => continue,
            Err(other) => return Err(other),
        };
        let (score, mask) = msac_score(&hyp, correspondences, t_norm)?;
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, hyp, mask));
        }
    }
    let Some((_, best_e, best_mask)) = best else {
        return Err(EstimatorError::EstimationFailed);
    };

    let support: Vec<Correspondence> = correspondences
        .iter()
        .zip(&best_mask)
        .filter_map(|(c, &keep)| keep.then_some(*c))
        .collect();
    if support.len() < cfg.min_sample {
        return Err(EstimatorError::EstimationFailed);
    }
    // One least-squares pass over the consensus set. If that set is itself
    // degenerate the sampled hypothesis stands.
    let final_e = eight_point(&support).unwrap_or(best_e);

    let (_, inliers) = msac_score(&final_e, correspondences, t_norm)?;
    let final_support: Vec<Correspondence> = correspondences
        .iter()
        .zip(&inliers)
        .filter_map(|(c, &keep)| keep.then_some(*c))
        .collect();
    if final_support.len() < cfg.min_sample {
        return Err(EstimatorError::EstimationFailed);
    }
    let pose = match decompose_essential(&final_e, &final_support) {
        Ok(p) => p,
        // No outright cheirality winner means the model explains the data
        // too poorly to orient the cameras.
        Err(_) => return Err(EstimatorError::EstimationFailed),
    };

    let inlier_ratio = final_support.len() as f64 / n as f64;
    Ok(EstimationResult {
        e: final_e,
        inliers,
        inlier_ratio,
        pose,
    })
}
