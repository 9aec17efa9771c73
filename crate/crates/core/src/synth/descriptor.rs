//! Descriptor synthesis.
//!
//! Real pipelines attach a descriptor to each keypoint that summarizes local
//! appearance. Here the base descriptor is a fixed random projection of the
//! distractor constellation sampled on the canonical integer grid, so it is
//! tied to the same appearance the patches render: matched views share a base,
//! different scene points get near-orthogonal ones. Per-view Gaussian noise
//! then models descriptor extraction error.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::{stream_rng, Stream};
use crate::synth::texture::Texture;
use crate::synth::SceneConfig;

/// Fixed projection from canonical-grid responses to descriptor space, drawn
/// once per scene seed: a `descriptor_dim x patch_size²` standard-normal
/// matrix, row-major. Pure in the config seed.
pub fn descriptor_projection(cfg: &SceneConfig) -> Vec<f64> {
    let mut rng = stream_rng(cfg.seed, Stream::DescriptorProjection, 0);
    let n = cfg.descriptor_dim * cfg.patch_size * cfg.patch_size;
    let mut p = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        p.push(z);
    }
    p
}

/// Unit-norm base descriptor of one scene point: distractor responses on the
/// canonical grid pushed through the fixed projection. The dominant blob is
/// excluded; it is identical for every point and would otherwise give all
/// descriptors a large shared component. A constellation with no distractor
/// response falls back to the first coordinate basis vector.
pub fn base_descriptor(cfg: &SceneConfig, projection: &[f64], texture: &Texture) -> Vec<f64> {
    let side = cfg.patch_size;
    let half = (side / 2) as f64;
    assert_eq!(projection.len(), cfg.descriptor_dim * side * side);

    let mut response = vec![0.0; side * side];
    for row in 0..side {
        let gy = row as f64 - half;
        for col in 0..side {
            let gx = col as f64 - half;
            let mut v = 0.0;
            for blob in &texture.blobs[1..] {
                let dx = gx - blob.offset[0];
                let dy = gy - blob.offset[1];
                let r2 = dx * dx + dy * dy;
                v += blob.amplitude * (-r2 / (2.0 * blob.sigma * blob.sigma)).exp();
            }
            response[row * side + col] = v;
        }
    }

    let mut d = vec![0.0; cfg.descriptor_dim];
    for (i, di) in d.iter_mut().enumerate() {
        let row = &projection[i * side * side..(i + 1) * side * side];
        *di = row.iter().zip(&response).map(|(p, r)| p * r).sum();
    }

    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        d.fill(0.0);
        d[0] = 1.0;
    } else {
        for x in &mut d {
            *x /= norm;
        }
    }
    d
}

/// One view's descriptor: the base plus Gaussian noise with std
/// `cfg.descriptor_noise`, renormalized. Zero noise returns the base
/// unchanged and consumes no draws.
pub fn noisy_descriptor(cfg: &SceneConfig, base: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    if cfg.descriptor_noise == 0.0 {
        return base.to_vec();
    }
    let mut d: Vec<f64> = base
        .iter()
        .map(|b| {
            let z: f64 = StandardNormal.sample(rng);
            b + cfg.descriptor_noise * z
        })
        .collect();
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    for x in &mut d {
        *x /= norm;
    }
    d
}

/// Builds the two per-view descriptors of a matched pair from one shared
/// base. Outlier records instead call [`noisy_descriptor`] with two
/// different bases.
pub fn make_descriptors(
    cfg: &SceneConfig,
    base: &[f64],
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let d1 = noisy_descriptor(cfg, base, rng);
    let d2 = noisy_descriptor(cfg, base, rng);
    (d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture::sample_texture;

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn texture_for(cfg: &SceneConfig, i: u64) -> Texture {
        sample_texture(cfg, &mut stream_rng(cfg.seed, Stream::Appearance, i))
    }

    #[test]
    fn zero_noise_returns_base_twice() {
        let cfg = SceneConfig {
            descriptor_noise: 0.0,
            ..SceneConfig::default()
        };
        let proj = descriptor_projection(&cfg);
        let base = base_descriptor(&cfg, &proj, &texture_for(&cfg, 0));
        let mut rng = stream_rng(cfg.seed, Stream::DescriptorNoise, 0);
        let (d1, d2) = make_descriptors(&cfg, &base, &mut rng);
        assert_eq!(d1, d2);
        assert_eq!(d1, base);
    }

    #[test]
    fn descriptors_are_unit_norm() {
        let cfg = SceneConfig::default();
        let proj = descriptor_projection(&cfg);
        for i in 0..100 {
            let base = base_descriptor(&cfg, &proj, &texture_for(&cfg, i));
            let mut rng = stream_rng(cfg.seed, Stream::DescriptorNoise, i);
            let (d1, d2) = make_descriptors(&cfg, &base, &mut rng);
            for d in [&base, &d1, &d2] {
                assert!((cos(d, d).sqrt() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn matched_pairs_beat_cross_pairs_by_half() {
        let cfg = SceneConfig {
            descriptor_noise: 0.1,
            ..SceneConfig::default()
        };
        let proj = descriptor_projection(&cfg);
        let n = 1000;
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
            .map(|i| {
                let base = base_descriptor(&cfg, &proj, &texture_for(&cfg, i));
                let mut rng = stream_rng(cfg.seed, Stream::DescriptorNoise, i);
                make_descriptors(&cfg, &base, &mut rng)
            })
            .collect();
        let matched: f64 = pairs.iter().map(|(d1, d2)| cos(d1, d2)).sum::<f64>() / n as f64;
        let cross: f64 = (0..n as usize)
            .map(|i| cos(&pairs[i].0, &pairs[(i + 1) % n as usize].1))
            .sum::<f64>()
            / n as f64;
        assert!(
            matched - cross > 0.5,
            "matched {matched:.3} vs cross {cross:.3}"
        );
    }

    #[test]
    fn distractor_free_texture_gets_basis_fallback() {
        let cfg = SceneConfig {
            texture_blobs: 1,
            ..SceneConfig::default()
        };
        let proj = descriptor_projection(&cfg);
        let base = base_descriptor(&cfg, &proj, &texture_for(&cfg, 0));
        assert_eq!(base[0], 1.0);
        assert!(base[1..].iter().all(|x| *x == 0.0));
    }
}
