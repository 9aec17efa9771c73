//! Synthetic two-view correspondence generation.
//!
//! Stands in for a real detector/matcher pipeline with data whose ground
//! truth is exact: camera pairs with known pose, scene points with exact
//! sub-pixel projections, Gaussian-blob patches whose dominant blob marks the
//! true location, and descriptors tied to patch appearance. Detections are
//! simulated by quantizing the true projections (plus optional jitter), which
//! is precisely the error the refinement network is supposed to undo.
//!
//! Everything is a pure function of the config and a sample index, built on
//! per-record RNG streams, so any record can be regenerated in isolation and
//! repeated runs are bit-identical.

mod descriptor;
mod scene;
mod texture;

pub use descriptor::{base_descriptor, descriptor_projection, make_descriptors, noisy_descriptor};
pub use scene::{
    border_margin, sample_pair_geometry, sample_point, sample_two_view, PairGeometry, ScenePoint,
    DEPTH_RANGE, RETRY_BUDGET,
};
pub use texture::{
    render_patch, sample_texture, Blob, Texture, View, DISTRACTOR_AMP, DISTRACTOR_SPREAD,
    MIN_DISTRACTOR_DIST,
};

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{
    epipolar_error, mean_focal, CameraIntrinsics, EssentialMatrix, GeometryError, PixelPoint,
    RelativePose,
};
use crate::net::round_half_away;
use crate::rng::{stream_rng, Stream};

/// Minimum symmetric epipolar distance, in pixels, between an outlier's two
/// keypoints. Outliers exist to exercise the clamped branch of the training
/// loss; a decoy that happens to land near the epipolar line would leak
/// gradient through the quadratic branch instead. The margin is wide enough
/// that even a refinement moving both keypoints by the full ±5 px budget
/// cannot drag an outlier below the default inlier threshold.
pub const OUTLIER_MIN_EPI_PX: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("scene config: {0}")]
    Config(&'static str),
    #[error("rejection sampling exhausted its {0}-attempt budget")]
    RetryBudget(u32),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
}

/// Everything that controls dataset generation. One instance fully determines
/// every record ever generated from it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default, deny_unknown_fields)
)]
pub struct SceneConfig {
    pub seed: u64,
    /// Correspondences per image pair; records are grouped into pairs in
    /// index order.
    pub num_points: usize,
    /// Image width and height in pixels.
    pub image_size: (u32, u32),
    /// Focal length interval; one focal per camera, fx = fy, principal point
    /// at the image center.
    pub focal_range: (f64, f64),
    /// Upper bound on the relative rotation angle, degrees.
    pub max_rotation_deg: f64,
    /// Blobs per texture constellation, dominant blob included.
    pub texture_blobs: usize,
    /// Blob standard deviation interval, pixels.
    pub blob_sigma_range: (f64, f64),
    /// Half-width of the uniform perturbation applied to the view-2 affine
    /// map's entries.
    pub affine_jitter: f64,
    /// Std of the additive Gaussian pixel noise in view 2.
    pub photometric_noise: f64,
    /// Std of the Gaussian noise added to each view's descriptor.
    pub descriptor_noise: f64,
    /// Half-width of the uniform jitter added to quantized keypoints. Zero
    /// means detections err by rounding alone.
    pub keypoint_jitter: f64,
    /// Share of records whose view-2 keypoint, appearance, and descriptor
    /// come from a different scene point.
    pub outlier_fraction: f64,
    pub descriptor_dim: usize,
    /// Side length of the square patch window, odd.
    pub patch_size: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            num_points: 200,
            image_size: (640, 480),
            focal_range: (400.0, 600.0),
            max_rotation_deg: 10.0,
            texture_blobs: 6,
            blob_sigma_range: (0.8, 1.6),
            affine_jitter: 0.05,
            photometric_noise: 0.02,
            descriptor_noise: 0.1,
            keypoint_jitter: 0.0,
            outlier_fraction: 0.1,
            descriptor_dim: 32,
            patch_size: 11,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.num_points == 0 {
            return Err(SynthError::Config("num_points must be positive"));
        }
        if self.patch_size < 3 || self.patch_size % 2 == 0 {
            return Err(SynthError::Config("patch_size must be odd and at least 3"));
        }
        let (flo, fhi) = self.focal_range;
        if !(flo.is_finite() && fhi.is_finite()) || flo <= 0.0 || fhi < flo {
            return Err(SynthError::Config("focal_range must be a positive interval"));
        }
        if !self.max_rotation_deg.is_finite()
            || self.max_rotation_deg < 0.0
            || self.max_rotation_deg >= 180.0
        {
            return Err(SynthError::Config("max_rotation_deg must lie in [0, 180)"));
        }
        if self.texture_blobs == 0 {
            return Err(SynthError::Config("texture_blobs must be positive"));
        }
        let (slo, shi) = self.blob_sigma_range;
        if !(slo.is_finite() && shi.is_finite()) || slo <= 0.0 || shi < slo {
            return Err(SynthError::Config("blob_sigma_range must be a positive interval"));
        }
        if !(0.0..=0.5).contains(&self.affine_jitter) {
            return Err(SynthError::Config("affine_jitter must lie in [0, 0.5]"));
        }
        for (value, name) in [
            (self.photometric_noise, "photometric_noise must be non-negative"),
            (self.descriptor_noise, "descriptor_noise must be non-negative"),
            (self.keypoint_jitter, "keypoint_jitter must be non-negative"),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(SynthError::Config(name));
            }
        }
        if !self.outlier_fraction.is_finite()
            || !(0.0..1.0).contains(&self.outlier_fraction)
        {
            return Err(SynthError::Config("outlier_fraction must lie in [0, 1)"));
        }
        if self.descriptor_dim == 0 {
            return Err(SynthError::Config("descriptor_dim must be positive"));
        }
        let margin = border_margin(self);
        let (w, h) = (f64::from(self.image_size.0), f64::from(self.image_size.1));
        if w - 1.0 - 2.0 * margin < 1.0 || h - 1.0 - 2.0 * margin < 1.0 {
            return Err(SynthError::Config(
                "image_size leaves no room inside the border margin",
            ));
        }
        Ok(())
    }
}

/// One generated correspondence with its full ground truth. Patch and score
/// buffers are row-major with `patch_side²` entries each.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoViewSample {
    pub sample_id: u64,
    pub patch_side: usize,
    pub image1: Vec<f64>,
    pub score1: Vec<f64>,
    pub image2: Vec<f64>,
    pub score2: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    /// Exact sub-pixel projections. For outliers, `true2` is the decoy
    /// point's projection, so the pair violates the epipolar constraint.
    pub true1: PixelPoint,
    pub true2: PixelPoint,
    /// Simulated detections: `round(true) + jitter`.
    pub quantized1: PixelPoint,
    pub quantized2: PixelPoint,
    pub k1: CameraIntrinsics,
    pub k2: CameraIntrinsics,
    pub gt_pose: RelativePose,
    pub gt_e: EssentialMatrix,
    pub is_outlier: bool,
}

/// Deterministic outlier schedule: record `index` is an outlier exactly when
/// the running count `floor((index+1)·fraction)` ticks up, which spreads
/// outliers evenly and makes their total exact for any prefix length that
/// divides evenly.
pub fn is_outlier_index(fraction: f64, index: u64) -> bool {
    let next = ((index + 1) as f64 * fraction).floor();
    let prev = (index as f64 * fraction).floor();
    next - prev >= 1.0
}

fn quantize(p: PixelPoint, jitter: f64, rng: &mut ChaCha8Rng) -> PixelPoint {
    let mut q = PixelPoint::new(round_half_away(p.x) as f64, round_half_away(p.y) as f64);
    if jitter > 0.0 {
        q.x += rng.gen_range(-jitter..=jitter);
        q.y += rng.gen_range(-jitter..=jitter);
    }
    q
}

/// Generates [`TwoViewSample`]s for a validated config. Construction draws
/// the descriptor projection once; generation itself is stateless.
#[derive(Debug, Clone)]
pub struct SampleGenerator {
    cfg: SceneConfig,
    projection: Vec<f64>,
}

impl SampleGenerator {
    pub fn new(cfg: SceneConfig) -> Result<Self, SynthError> {
        cfg.validate()?;
        let projection = descriptor_projection(&cfg);
        Ok(Self { cfg, projection })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.cfg
    }

    /// Builds record `sample_id`. Records `[k·num_points, (k+1)·num_points)`
    /// share pair geometry `k`; everything else is drawn from streams keyed
    /// by the record id alone.
    pub fn generate(&self, sample_id: u64) -> Result<TwoViewSample, SynthError> {
        let cfg = &self.cfg;
        let pair_index = sample_id / cfg.num_points as u64;
        let geom = sample_pair_geometry(cfg, pair_index)?;
        let gt_e = EssentialMatrix::from_pose(&geom.pose);

        let mut point_rng = stream_rng(cfg.seed, Stream::Point, sample_id);
        let point = sample_point(cfg, &geom, &mut point_rng)?;
        let quantized1 = quantize(point.true1, cfg.keypoint_jitter, &mut point_rng);

        let is_outlier = is_outlier_index(cfg.outlier_fraction, sample_id);
        let decoy = if is_outlier {
            Some(self.sample_decoy(&geom, &gt_e, point.true1, sample_id)?)
        } else {
            None
        };
        let (true2, quantized2) = match decoy {
            Some((p, q)) => (p, q),
            None => (point.true2, quantize(point.true2, cfg.keypoint_jitter, &mut point_rng)),
        };

        let mut app_rng = stream_rng(cfg.seed, Stream::Appearance, sample_id);
        let texture1 = sample_texture(cfg, &mut app_rng);
        let wc1 = (round_half_away(quantized1.x), round_half_away(quantized1.y));
        let wc2 = (round_half_away(quantized2.x), round_half_away(quantized2.y));
        let (image1, score1) =
            texture::render_view(cfg, &texture1, point.true1, wc1, View::One, &mut app_rng);

        let base1 = base_descriptor(cfg, &self.projection, &texture1);
        let (image2, score2, base2) = if is_outlier {
            let mut decoy_rng = stream_rng(cfg.seed, Stream::DecoyAppearance, sample_id);
            let texture2 = sample_texture(cfg, &mut decoy_rng);
            let (img, sc) =
                texture::render_view(cfg, &texture2, true2, wc2, View::Two, &mut decoy_rng);
            let base2 = base_descriptor(cfg, &self.projection, &texture2);
            (img, sc, base2)
        } else {
            let (img, sc) =
                texture::render_view(cfg, &texture1, true2, wc2, View::Two, &mut app_rng);
            (img, sc, base1.clone())
        };

        let mut noise_rng = stream_rng(cfg.seed, Stream::DescriptorNoise, sample_id);
        let d1 = noisy_descriptor(cfg, &base1, &mut noise_rng);
        let d2 = noisy_descriptor(cfg, &base2, &mut noise_rng);

        Ok(TwoViewSample {
            sample_id,
            patch_side: cfg.patch_size,
            image1,
            score1,
            image2,
            score2,
            d1,
            d2,
            true1: point.true1,
            true2,
            quantized1,
            quantized2,
            k1: geom.k1,
            k2: geom.k2,
            gt_pose: geom.pose.clone(),
            gt_e,
            is_outlier,
        })
    }

    /// Draws the view-2 stand-in for an outlier: a different scene point
    /// whose projection keeps a wide epipolar margin from the view-1
    /// keypoint, so the mismatch is unambiguous at training thresholds.
    fn sample_decoy(
        &self,
        geom: &PairGeometry,
        gt_e: &EssentialMatrix,
        true1: PixelPoint,
        sample_id: u64,
    ) -> Result<(PixelPoint, PixelPoint), SynthError> {
        let cfg = &self.cfg;
        let mut rng = stream_rng(cfg.seed, Stream::DecoyPoint, sample_id);
        let n1 = geom.k1.normalize(true1)?;
        let focal = mean_focal(&geom.k1, &geom.k2);
        for _ in 0..RETRY_BUDGET {
            let cand = sample_point(cfg, geom, &mut rng)?;
            let n2 = geom.k2.normalize(cand.true2)?;
            let Ok(err) = epipolar_error(&n1, &n2, gt_e) else {
                continue;
            };
            if err.sqrt() * focal >= OUTLIER_MIN_EPI_PX {
                let q2 = quantize(cand.true2, cfg.keypoint_jitter, &mut rng);
                return Ok((cand.true2, q2));
            }
        }
        Err(SynthError::RetryBudget(RETRY_BUDGET))
    }
}
