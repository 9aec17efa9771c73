//! Network parameters: construction, initialization, and the flat parameter
//! view shared by the optimizer and the checkpoint format.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec::Vec;

use rand::Rng;

use super::config::{RefineConfig, Variant};
use super::NetError;
use crate::rng::{stream_rng, Stream};
use crate::tensor::{ConvGrads, ConvParams, Padding};
use crate::Real;

/// The five shared convolution layers plus, for the projection variant, the
/// learned score head. SamOnly configurations carry no layers at all.
///
/// The flat parameter order is fixed and load-bearing: per layer kernels
/// then bias, layers in order, head last. Adam moments and checkpoint
/// buffers both index into that order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights<T> {
    pub layers: Vec<ConvParams<T>>,
    /// 1x1 projection collapsing D feature channels to one score, used only
    /// by [`Variant::CnnOnly`]. No bias: the soft argmax is invariant to a
    /// constant shift of the whole map, so a bias could never learn anything.
    pub head: Option<Vec<T>>,
}

/// Per-layer padding: same exactly where input and output channels agree.
pub(crate) const PADDING_PLAN: [Padding; 5] = [
    Padding::Valid,
    Padding::Same,
    Padding::Valid,
    Padding::Same,
    Padding::Valid,
];

/// Initial bias for the rectified layers. Patch intensities are non negative
/// and mostly near zero away from the blobs, so with zero biases a large
/// share of units would start out pinned to the ReLU kink: dead for half the
/// inputs and a hazard for finite-difference verification, which cannot step
/// across a kink. A small positive shift keeps every channel responsive at
/// the start of training. The embedding layer has no ReLU and keeps bias 0.
const RELU_BIAS_INIT: f64 = 0.1;

impl<T: Real> NetworkWeights<T> {
    /// Fan-in-scaled uniform initialization (bound sqrt(6/fan_in)), rectified
    /// layers get a small positive bias, each layer on its own deterministic
    /// stream of `seed`.
    pub fn init(cfg: &RefineConfig, seed: u64) -> Result<Self, NetError> {
        cfg.validate()?;
        if !cfg.variant.has_network() {
            return Ok(Self {
                layers: Vec::new(),
                head: None,
            });
        }
        let mut layers = Vec::with_capacity(5);
        let mut in_c = cfg.in_channels();
        for (l, (&out_c, &padding)) in cfg.channels.iter().zip(&PADDING_PLAN).enumerate() {
            let mut rng = stream_rng(seed, Stream::WeightInit, l as u64);
            let bound = (6.0 / (in_c * 9) as f64).sqrt();
            let mut params = ConvParams::zeros(out_c, in_c, padding);
            for k in &mut params.kernels {
                *k = T::from_f64(rng.gen_range(-bound..bound));
            }
            if l < 4 {
                for b in &mut params.bias {
                    *b = T::from_f64(RELU_BIAS_INIT);
                }
            }
            layers.push(params);
            in_c = out_c;
        }
        let head = if cfg.variant == Variant::CnnOnly {
            let mut rng = stream_rng(seed, Stream::WeightInit, 5);
            let bound = (6.0 / cfg.descriptor_dim as f64).sqrt();
            Some(
                (0..cfg.descriptor_dim)
                    .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
                    .collect(),
            )
        } else {
            None
        };
        Ok(Self { layers, head })
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.kernels.len() + l.bias.len())
            .sum::<usize>()
            + self.head.as_ref().map_or(0, Vec::len)
    }

    /// Append every parameter to `out` in the canonical order.
    pub fn flatten_into(&self, out: &mut Vec<T>) {
        for l in &self.layers {
            out.extend_from_slice(&l.kernels);
            out.extend_from_slice(&l.bias);
        }
        if let Some(h) = &self.head {
            out.extend_from_slice(h);
        }
    }

    /// Overwrite every parameter from a flat slice in the canonical order.
    pub fn assign_from_flat(&mut self, flat: &[T]) -> Result<(), NetError> {
        if flat.len() != self.param_count() {
            return Err(NetError::Config("flat parameter length mismatch"));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nk = l.kernels.len();
            l.kernels.copy_from_slice(&flat[off..off + nk]);
            off += nk;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        if let Some(h) = &mut self.head {
            let nh = h.len();
            h.copy_from_slice(&flat[off..off + nh]);
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> NetworkWeights<U> {
        NetworkWeights {
            layers: self.layers.iter().map(ConvParams::cast).collect(),
            head: self
                .head
                .as_ref()
                .map(|h| h.iter().map(|v| U::from_f64(v.into_f64())).collect()),
        }
    }
}

/// Gradient buffers mirroring [`NetworkWeights`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads<T> {
    pub layers: Vec<ConvGrads<T>>,
    pub head: Option<Vec<T>>,
}

impl<T: Real> NetworkGrads<T> {
    pub fn zeros_like(weights: &NetworkWeights<T>) -> Self {
        Self {
            layers: weights
                .layers
                .iter()
                .map(|l| ConvGrads {
                    kernels: alloc::vec![T::default(); l.kernels.len()],
                    bias: alloc::vec![T::default(); l.bias.len()],
                })
                .collect(),
            head: weights
                .head
                .as_ref()
                .map(|h| alloc::vec![T::default(); h.len()]),
        }
    }

    /// Elementwise accumulate, used when summing per-match gradients into a
    /// batch gradient. Fixed iteration order keeps training bit-reproducible.
    pub fn accumulate(&mut self, other: &NetworkGrads<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.kernels.iter_mut().zip(&b.kernels) {
                *x += *y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += *y;
            }
        }
        if let (Some(a), Some(b)) = (&mut self.head, &other.head) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for l in &mut self.layers {
            for v in &mut l.kernels {
                *v *= factor;
            }
            for v in &mut l.bias {
                *v *= factor;
            }
        }
        if let Some(h) = &mut self.head {
            for v in h {
                *v *= factor;
            }
        }
    }

    /// Same canonical order as [`NetworkWeights::flatten_into`].
    pub fn flatten_into(&self, out: &mut Vec<T>) {
        for l in &self.layers {
            out.extend_from_slice(&l.kernels);
            out.extend_from_slice(&l.bias);
        }
        if let Some(h) = &self.head {
            out.extend_from_slice(h);
        }
    }
}
