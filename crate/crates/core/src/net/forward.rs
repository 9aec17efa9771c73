//! Forward and backward passes of the refinement network.
//!
//! One shared five-layer stack embeds each view's patch into a D-channel
//! 5x5 feature map, L2-normalized per location. A variant-specific channel
//! weighting collapses the map to matching scores, and the soft argmax of
//! those scores, scaled by sigma, is the keypoint displacement.
//!
//! The backward pass starts from gradients at the displacements and stops
//! at the network weights: patches and descriptors are constants by design,
//! matching the training objective where only the displacement is learned.

use alloc::vec;
use alloc::vec::Vec;

use super::config::{RefineConfig, Variant};
use super::weights::{NetworkGrads, NetworkWeights};
use super::{NetError, PatchPair};
use crate::tensor::{
    conv2d_backward, conv2d_forward, l2_normalize_channels, l2_normalize_channels_backward,
    relu, relu_backward, softargmax2d, softargmax2d_backward, ScoreMap, Tensor,
};
use crate::Real;

/// Epsilon floor of the per-location feature normalization.
pub const FEATURE_NORM_EPS: f64 = 1e-8;

/// Outputs of one refinement forward pass over a match.
#[derive(Debug, Clone)]
pub struct Refinement<T> {
    pub score1: ScoreMap<T>,
    pub score2: ScoreMap<T>,
    /// Displacements in patch pixels, (x, y).
    pub delta1: [T; 2],
    pub delta2: [T; 2],
}

/// Activations one view's backward pass needs. Post-ReLU activations are
/// recomputed from the stored pre-activations instead of stored; they are
/// cheap and this halves the cache.
#[derive(Debug, Clone)]
struct ViewTrace<T> {
    patch: Tensor<T>,
    /// Convolution outputs before ReLU, one per layer; the last entry is
    /// the raw embedding ahead of normalization.
    pre_acts: Vec<Tensor<T>>,
    features: Tensor<T>,
    score: ScoreMap<T>,
    /// Per-channel weights that turned features into scores (mean
    /// descriptor, own descriptor, or the learned head).
    channel_weights: Vec<T>,
}

/// Opaque state connecting a forward pass to its backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// None for the parameterless sam_only variant.
    views: Option<[ViewTrace<T>; 2]>,
}

impl<T: Real> ForwardCache<T> {
    /// Smallest absolute pre-activation across the rectified layers of both
    /// views, infinite when the variant runs no network. Finite-difference
    /// checks are only valid when this comfortably exceeds the probe step,
    /// since stepping across a ReLU kink flips a mask and corrupts the
    /// numeric gradient; external gradcheck harnesses need the same guard
    /// the in-crate ones use.
    pub fn min_rectifier_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        if let Some(views) = &self.views {
            for v in views {
                let rectified = v.pre_acts.len().saturating_sub(1);
                for t in &v.pre_acts[..rectified] {
                    for x in &t.data {
                        margin = margin.min(x.into_f64().abs());
                    }
                }
            }
        }
        margin
    }
}

fn score_from_features<T: Real>(
    features: &Tensor<T>,
    weights: &[T],
) -> Result<ScoreMap<T>, NetError> {
    let plane = features.h * features.w;
    let mut s = vec![T::default(); plane];
    for (c, &q) in weights.iter().enumerate() {
        let ch = &features.data[c * plane..(c + 1) * plane];
        for (acc, &f) in s.iter_mut().zip(ch) {
            *acc += q * f;
        }
    }
    Ok(ScoreMap::new(features.h, s)?)
}

fn run_view<T: Real>(
    weights: &NetworkWeights<T>,
    cfg: &RefineConfig,
    patch: &Tensor<T>,
    channel_weights: Vec<T>,
) -> Result<(ViewTrace<T>, [T; 2]), NetError> {
    let mut pre_acts = Vec::with_capacity(weights.layers.len());
    let mut x = patch.clone();
    let last = weights.layers.len() - 1;
    for (l, params) in weights.layers.iter().enumerate() {
        let a = conv2d_forward(&x, params)?;
        if l < last {
            x = relu(&a);
        }
        pre_acts.push(a);
    }
    let embedding = pre_acts.last().expect("five layers");
    if embedding.h != cfg.output_map {
        return Err(NetError::Config("layer plan does not reach the output map"));
    }
    let features = l2_normalize_channels(embedding, T::from_f64(FEATURE_NORM_EPS));
    let score = score_from_features(&features, &channel_weights)?;
    let m = softargmax2d(&score);
    let sigma = T::from_f64(cfg.sigma);
    let delta = [sigma * m[0], sigma * m[1]];
    Ok((
        ViewTrace {
            patch: patch.clone(),
            pre_acts,
            features,
            score,
            channel_weights,
        },
        delta,
    ))
}

fn validate_pair<T: Real>(pair: &PatchPair<T>, cfg: &RefineConfig) -> Result<(), NetError> {
    let want = (cfg.in_channels(), cfg.input_patch, cfg.input_patch);
    if pair.patch1.shape() != want || pair.patch2.shape() != want {
        return Err(NetError::BadPatchShape {
            expected: want,
            got1: pair.patch1.shape(),
            got2: pair.patch2.shape(),
        });
    }
    if cfg.variant.uses_descriptors()
        && (pair.d1.len() != cfg.descriptor_dim || pair.d2.len() != cfg.descriptor_dim)
    {
        return Err(NetError::BadDescriptorLength {
            expected: cfg.descriptor_dim,
            got1: pair.d1.len(),
            got2: pair.d2.len(),
        });
    }
    Ok(())
}

/// The sam_only pathway: soft argmax straight on the detector score plane.
fn sam_only_forward<T: Real>(
    pair: &PatchPair<T>,
    cfg: &RefineConfig,
) -> Result<Refinement<T>, NetError> {
    let side = cfg.input_patch;
    let plane = side * side;
    let sigma = T::from_f64(cfg.sam_only_sigma());
    let mut scores = [None, None];
    let mut deltas = [[T::default(); 2]; 2];
    for (v, patch) in [&pair.patch1, &pair.patch2].into_iter().enumerate() {
        let s = ScoreMap::new(side, patch.data[plane..2 * plane].to_vec())?;
        let m = softargmax2d(&s);
        deltas[v] = [sigma * m[0], sigma * m[1]];
        scores[v] = Some(s);
    }
    Ok(Refinement {
        score1: scores[0].take().expect("set above"),
        score2: scores[1].take().expect("set above"),
        delta1: deltas[0],
        delta2: deltas[1],
    })
}

/// Refine one match: run both patches through the shared stack and read off
/// score maps and displacements. The returned cache feeds [`backward`].
pub fn forward<T: Real>(
    weights: &NetworkWeights<T>,
    pair: &PatchPair<T>,
    cfg: &RefineConfig,
) -> Result<(Refinement<T>, ForwardCache<T>), NetError> {
    cfg.validate()?;
    validate_pair(pair, cfg)?;

    if cfg.variant == Variant::SamOnly {
        return Ok((sam_only_forward(pair, cfg)?, ForwardCache { views: None }));
    }
    if weights.layers.len() != 5 {
        return Err(NetError::Config("variant needs the five-layer network"));
    }

    let half = T::from_f64(0.5);
    let (q1, q2): (Vec<T>, Vec<T>) = match cfg.variant {
        Variant::Full => {
            let mean: Vec<T> = pair
                .d1
                .iter()
                .zip(&pair.d2)
                .map(|(&a, &b)| (a + b) * half)
                .collect();
            (mean.clone(), mean)
        }
        Variant::CnnDg => (pair.d1.clone(), pair.d2.clone()),
        Variant::CnnOnly => {
            let head = weights
                .head
                .as_ref()
                .ok_or(NetError::Config("cnn_only weights are missing the head"))?;
            (head.clone(), head.clone())
        }
        Variant::SamOnly => unreachable!("handled above"),
    };

    let (t1, delta1) = run_view(weights, cfg, &pair.patch1, q1)?;
    let (t2, delta2) = run_view(weights, cfg, &pair.patch2, q2)?;
    Ok((
        Refinement {
            score1: t1.score.clone(),
            score2: t2.score.clone(),
            delta1,
            delta2,
        },
        ForwardCache {
            views: Some([t1, t2]),
        },
    ))
}

fn backward_view<T: Real>(
    weights: &NetworkWeights<T>,
    cfg: &RefineConfig,
    trace: &ViewTrace<T>,
    grad_delta: [T; 2],
    grads: &mut NetworkGrads<T>,
) -> Result<(), NetError> {
    let sigma = T::from_f64(cfg.sigma);
    let grad_m = [sigma * grad_delta[0], sigma * grad_delta[1]];
    let grad_score = softargmax2d_backward(&trace.score, grad_m);

    let plane = trace.features.h * trace.features.w;
    if let (Some(hg), Variant::CnnOnly) = (&mut grads.head, cfg.variant) {
        for (c, slot) in hg.iter_mut().enumerate() {
            let ch = &trace.features.data[c * plane..(c + 1) * plane];
            let mut acc = T::default();
            for (&g, &f) in grad_score.iter().zip(ch) {
                acc += g * f;
            }
            *slot += acc;
        }
    }

    let mut grad_features = Tensor::zeros(trace.features.c, trace.features.h, trace.features.w);
    for (c, &q) in trace.channel_weights.iter().enumerate() {
        let dst = &mut grad_features.data[c * plane..(c + 1) * plane];
        for (d, &g) in dst.iter_mut().zip(&grad_score) {
            *d = q * g;
        }
    }

    let embedding = trace.pre_acts.last().expect("five layers");
    let mut grad = l2_normalize_channels_backward(
        embedding,
        T::from_f64(FEATURE_NORM_EPS),
        &grad_features,
    )?;

    // Walk the stack backwards. Layer l's input is ReLU of layer l-1's
    // pre-activation, except layer 0 whose input is the patch itself.
    for l in (0..weights.layers.len()).rev() {
        let input_owned;
        let input = if l == 0 {
            &trace.patch
        } else {
            input_owned = relu(&trace.pre_acts[l - 1]);
            &input_owned
        };
        let (grad_input, layer_grads) = conv2d_backward(input, &weights.layers[l], &grad)?;
        for (dst, src) in grads.layers[l].kernels.iter_mut().zip(&layer_grads.kernels) {
            *dst += *src;
        }
        for (dst, src) in grads.layers[l].bias.iter_mut().zip(&layer_grads.bias) {
            *dst += *src;
        }
        grad = if l == 0 {
            break;
        } else {
            relu_backward(&trace.pre_acts[l - 1], &grad_input)?
        };
    }
    Ok(())
}

/// Push displacement gradients back to the shared weights. Contributions
/// from both views add into the same buffers.
///
/// For sam_only this is a no-op returning empty gradients: there is nothing
/// to train.
pub fn backward<T: Real>(
    weights: &NetworkWeights<T>,
    cfg: &RefineConfig,
    cache: &ForwardCache<T>,
    grad_delta1: [T; 2],
    grad_delta2: [T; 2],
) -> Result<NetworkGrads<T>, NetError> {
    let mut grads = NetworkGrads::zeros_like(weights);
    let Some(views) = &cache.views else {
        if cfg.variant == Variant::SamOnly {
            return Ok(grads);
        }
        return Err(NetError::Config("cache does not match a network variant"));
    };
    backward_view(weights, cfg, &views[0], grad_delta1, &mut grads)?;
    backward_view(weights, cfg, &views[1], grad_delta2, &mut grads)?;
    Ok(grads)
}
