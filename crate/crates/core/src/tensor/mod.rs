//! Dense-tensor compute for exactly the layers the refinement network needs.
//!
//! There is no autodiff graph here. The network topology is fixed, so each
//! layer exposes a forward function and an explicit backward function, and
//! the network module composes them in reverse order by hand. Every backward
//! pass is validated against central finite differences in double precision;
//! see [`check::finite_diff_check`].
//!
//! All kernels are generic over [`crate::Real`] so training runs in f32 and
//! the gradient-check tests run the same code paths in f64, where finite
//! differences are actually trustworthy.

mod adam;
mod check;
mod conv;
mod pointwise;
mod softargmax;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use check::finite_diff_check;
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvParams, Padding};
pub use pointwise::{
    l2_normalize_channels, l2_normalize_channels_backward, relu, relu_backward,
};
pub use softargmax::{softargmax2d, softargmax2d_backward, ScoreMap};

use alloc::vec;
use alloc::vec::Vec;

use crate::Real;

/// Errors from shape validation. Numeric issues (overflow to infinity and
/// the like) are the caller's problem; these kernels never produce NaN from
/// finite input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TensorError {
    #[error("{context}: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    #[error("valid 3x3 convolution needs at least 3x3 input, got {h}x{w}")]
    InputTooSmall { h: usize, w: usize },
    #[error("score map side must be odd and positive, got {0}")]
    BadScoreMapSide(usize),
    #[error("score map contains a non-finite value")]
    NonFiniteScores,
    #[error("{context}: parameter length {params} does not match buffer length {buffer}")]
    LengthMismatch {
        context: &'static str,
        params: usize,
        buffer: usize,
    },
}

/// A dense (channels, height, width) array in row-major order, channel
/// outermost. The flat one-dimensional case is just (1, 1, n).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![T::default(); c * h * w],
        }
    }

    /// Wrap an existing buffer. Panics when the length disagrees with the
    /// shape; this is a programming error, not an input condition.
    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), c * h * w, "tensor data length vs shape");
        Self { c, h, w, data }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.h + y) * self.w + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut T {
        &mut self.data[(c * self.h + y) * self.w + x]
    }

    /// One channel plane as a slice.
    #[inline]
    pub fn channel(&self, c: usize) -> &[T] {
        &self.data[c * self.h * self.w..(c + 1) * self.h * self.w]
    }

    /// Convert element by element. Used to lift f32 networks into f64 for
    /// gradient checking.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|v| U::from_f64(v.into_f64())).collect(),
        }
    }
}
