//! Gaussian-blob appearance model.
//!
//! Each scene point owns a small constellation of Gaussian blobs in a
//! canonical frame anchored at the point's true sub-pixel projection. The
//! dominant blob sits exactly on the anchor; distractor blobs give the
//! constellation a recognizable shape. View 2 renders the same constellation
//! through a mild affine distortion of the offsets plus photometric noise,
//! which leaves the dominant blob pinned to the true projection in both
//! views. Sub-pixel recovery therefore has an exact, closed-form target.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::PixelPoint;
use crate::net::round_half_away;
use crate::synth::SceneConfig;

/// Distractor offsets are drawn uniformly from this square half-width.
pub const DISTRACTOR_SPREAD: f64 = 7.0;

/// Distractors keep at least this distance from the dominant blob so the
/// brightest pixel near the window center is unambiguous.
pub const MIN_DISTRACTOR_DIST: f64 = 2.5;

/// Amplitude range for distractor blobs; the dominant blob has amplitude 1.
pub const DISTRACTOR_AMP: (f64, f64) = (0.2, 0.6);

/// Which camera a patch is rendered for. View 2 applies the distortion and
/// noise described on [`render_patch`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    One,
    Two,
}

#[derive(Debug, Clone, Copy)]
pub struct Blob {
    /// Canonical-frame offset from the anchor, in pixels.
    pub offset: [f64; 2],
    pub amplitude: f64,
    pub sigma: f64,
}

/// Canonical blob constellation of one scene point. `blobs[0]` is the
/// dominant blob: zero offset, unit amplitude.
#[derive(Debug, Clone)]
pub struct Texture {
    pub blobs: Vec<Blob>,
}

/// Draws a constellation with `cfg.texture_blobs` blobs. Distractor offsets
/// are rejection-sampled away from the anchor; the budget cannot realistically
/// run out (the excluded disk covers under a tenth of the offset square), so
/// exhaustion falls back to the last draw rather than erroring.
pub fn sample_texture(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Texture {
    let mut blobs = Vec::with_capacity(cfg.texture_blobs);
    blobs.push(Blob {
        offset: [0.0, 0.0],
        amplitude: 1.0,
        sigma: rng.gen_range(cfg.blob_sigma_range.0..=cfg.blob_sigma_range.1),
    });
    for _ in 1..cfg.texture_blobs {
        let mut offset = [0.0, 0.0];
        for _ in 0..100 {
            offset = [
                rng.gen_range(-DISTRACTOR_SPREAD..=DISTRACTOR_SPREAD),
                rng.gen_range(-DISTRACTOR_SPREAD..=DISTRACTOR_SPREAD),
            ];
            if (offset[0] * offset[0] + offset[1] * offset[1]).sqrt() >= MIN_DISTRACTOR_DIST {
                break;
            }
        }
        blobs.push(Blob {
            offset,
            amplitude: rng.gen_range(DISTRACTOR_AMP.0..=DISTRACTOR_AMP.1),
            sigma: rng.gen_range(cfg.blob_sigma_range.0..=cfg.blob_sigma_range.1),
        });
    }
    Texture { blobs }
}

/// Renders one view of a constellation into the square window centered on the
/// integer pixel `window_center`. Returns the image patch and the score patch,
/// both row-major with `cfg.patch_size²` entries.
///
/// View 1 evaluates the blobs as-is. View 2 first maps every canonical offset
/// through `I + J`, where each entry of `J` is drawn uniformly from
/// `±affine_jitter`, then adds per-pixel Gaussian noise with std
/// `photometric_noise`. Both views clamp intensities to `[0, 1]`. The score
/// patch is the dominant blob's response alone, scaled so its maximum over the
/// window grid is exactly 1; the dominant offset is zero, so the peak lands on
/// the integer pixel nearest `true_center` in either view.
pub(crate) fn render_view(
    cfg: &SceneConfig,
    texture: &Texture,
    true_center: PixelPoint,
    window_center: (i64, i64),
    view: View,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let side = cfg.patch_size;
    let half = (side / 2) as i64;

    let distortion = if view == View::Two && cfg.affine_jitter > 0.0 {
        let mut j = [0.0; 4];
        for entry in &mut j {
            *entry = rng.gen_range(-cfg.affine_jitter..=cfg.affine_jitter);
        }
        [[1.0 + j[0], j[1]], [j[2], 1.0 + j[3]]]
    } else {
        [[1.0, 0.0], [0.0, 1.0]]
    };

    let positions: Vec<[f64; 2]> = texture
        .blobs
        .iter()
        .map(|b| {
            let ox = distortion[0][0] * b.offset[0] + distortion[0][1] * b.offset[1];
            let oy = distortion[1][0] * b.offset[0] + distortion[1][1] * b.offset[1];
            [true_center.x + ox, true_center.y + oy]
        })
        .collect();

    let mut image = vec![0.0; side * side];
    let mut score = vec![0.0; side * side];
    for row in 0..side {
        let gy = (window_center.1 - half + row as i64) as f64;
        for col in 0..side {
            let gx = (window_center.0 - half + col as i64) as f64;
            let mut v = 0.0;
            for (bi, (blob, pos)) in texture.blobs.iter().zip(&positions).enumerate() {
                let dx = gx - pos[0];
                let dy = gy - pos[1];
                let r2 = dx * dx + dy * dy;
                let response = blob.amplitude * (-r2 / (2.0 * blob.sigma * blob.sigma)).exp();
                v += response;
                if bi == 0 {
                    score[row * side + col] = response;
                }
            }
            image[row * side + col] = v;
        }
    }

    if view == View::Two && cfg.photometric_noise > 0.0 {
        for v in &mut image {
            let z: f64 = StandardNormal.sample(rng);
            *v += cfg.photometric_noise * z;
        }
    }
    for v in &mut image {
        *v = v.clamp(0.0, 1.0);
    }

    let peak = score.iter().cloned().fold(0.0, f64::max);
    debug_assert!(peak > 0.0, "dominant blob must respond inside the window");
    for s in &mut score {
        *s /= peak;
    }

    (image, score)
}

/// Renders the patch pair inputs for one view with the window centered on the
/// integer pixel nearest `true_center`. The texture is drawn from `rng`
/// first, so calling this twice with identically seeded generators (once per
/// view) renders the same constellation; view 2 consumes further draws for
/// its distortion and noise.
pub fn render_patch(
    cfg: &SceneConfig,
    true_center: PixelPoint,
    view: View,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let texture = sample_texture(cfg, rng);
    let wc = (round_half_away(true_center.x), round_half_away(true_center.y));
    render_view(cfg, &texture, true_center, wc, view, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn quiet_cfg() -> SceneConfig {
        SceneConfig {
            affine_jitter: 0.0,
            photometric_noise: 0.0,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn zero_noise_zero_jitter_views_identical() {
        let cfg = quiet_cfg();
        let tc = PixelPoint::new(100.3, 57.8);
        let (img1, sc1) = render_patch(&cfg, tc, View::One, &mut stream_rng(1, Stream::Appearance, 0));
        let (img2, sc2) = render_patch(&cfg, tc, View::Two, &mut stream_rng(1, Stream::Appearance, 0));
        assert_eq!(img1, img2);
        assert_eq!(sc1, sc2);
    }

    #[test]
    fn centered_blob_peaks_at_window_center() {
        let cfg = SceneConfig {
            texture_blobs: 1,
            ..quiet_cfg()
        };
        let tc = PixelPoint::new(32.0, 40.0);
        let (img, sc) = render_patch(&cfg, tc, View::One, &mut stream_rng(9, Stream::Appearance, 4));
        let center = (cfg.patch_size / 2) * cfg.patch_size + cfg.patch_size / 2;
        let argmax = img
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, center);
        assert_eq!(sc[center], 1.0);
    }

    #[test]
    fn dominant_blob_follows_gaussian_profile() {
        let cfg = SceneConfig {
            texture_blobs: 1,
            ..quiet_cfg()
        };
        let sigma = 1.3;
        let texture = Texture {
            blobs: vec![Blob {
                offset: [0.0, 0.0],
                amplitude: 1.0,
                sigma,
            }],
        };
        let tc = PixelPoint::new(50.4, 60.0);
        let mut rng = stream_rng(0, Stream::Appearance, 0);
        let (img, _) = render_view(&cfg, &texture, tc, (50, 60), View::One, &mut rng);
        let side = cfg.patch_size;
        let half = (side / 2) as i64;
        for row in 0..side {
            for col in 0..side {
                let gx = (50 - half + col as i64) as f64;
                let gy = (60 - half + row as i64) as f64;
                let r2 = (gx - tc.x).powi(2) + (gy - tc.y).powi(2);
                let expected = (-r2 / (2.0 * sigma * sigma)).exp();
                assert!((img[row * side + col] - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn score_peak_lands_on_nearest_integer_pixel() {
        let cfg = quiet_cfg();
        let tc = PixelPoint::new(81.4, 33.7);
        let (_, sc) = render_patch(&cfg, tc, View::One, &mut stream_rng(3, Stream::Appearance, 7));
        // Nearest pixel to (81.4, 33.7) is (81, 34); the window center is the
        // same pixel, so the peak sits at the middle cell.
        let side = cfg.patch_size;
        let center = (side / 2) * side + side / 2;
        assert_eq!(sc[center], 1.0);
        for (i, s) in sc.iter().enumerate() {
            assert!(*s <= 1.0);
            if i != center {
                assert!(*s < 1.0);
            }
        }
    }

    #[test]
    fn view_two_keeps_dominant_blob_anchored() {
        // With distortion but no noise, the dominant blob must stay at the
        // true center because its canonical offset is zero.
        let cfg = SceneConfig {
            affine_jitter: 0.05,
            photometric_noise: 0.0,
            texture_blobs: 1,
            ..SceneConfig::default()
        };
        let tc = PixelPoint::new(200.0, 100.0);
        let (img1, _) = render_patch(&cfg, tc, View::One, &mut stream_rng(5, Stream::Appearance, 2));
        let (img2, _) = render_patch(&cfg, tc, View::Two, &mut stream_rng(5, Stream::Appearance, 2));
        assert_eq!(img1, img2);
    }

    #[test]
    fn distractors_keep_their_distance() {
        let cfg = SceneConfig::default();
        for i in 0..50 {
            let texture = sample_texture(&cfg, &mut stream_rng(7, Stream::Appearance, i));
            assert_eq!(texture.blobs.len(), cfg.texture_blobs);
            assert_eq!(texture.blobs[0].offset, [0.0, 0.0]);
            assert_eq!(texture.blobs[0].amplitude, 1.0);
            for blob in &texture.blobs[1..] {
                let r = (blob.offset[0].powi(2) + blob.offset[1].powi(2)).sqrt();
                assert!(r >= MIN_DISTRACTOR_DIST);
                assert!(blob.offset[0].abs() <= DISTRACTOR_SPREAD);
                assert!(blob.offset[1].abs() <= DISTRACTOR_SPREAD);
                assert!(blob.amplitude >= DISTRACTOR_AMP.0 && blob.amplitude <= DISTRACTOR_AMP.1);
            }
        }
    }

    #[test]
    fn intensities_stay_in_unit_interval() {
        let cfg = SceneConfig {
            photometric_noise: 0.3,
            ..SceneConfig::default()
        };
        let tc = PixelPoint::new(64.2, 64.9);
        let (img, sc) = render_patch(&cfg, tc, View::Two, &mut stream_rng(11, Stream::Appearance, 1));
        for v in img.iter().chain(sc.iter()) {
            assert!(*v >= 0.0 && *v <= 1.0);
        }
    }
}
