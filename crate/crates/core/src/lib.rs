//! Descriptor-guided sub-pixel refinement of matched keypoints.
//!
//! A detected keypoint lives on the integer pixel grid; its true location
//! usually does not. This crate implements a small refinement module that
//! looks at the image patch around each detection, scores a coarse grid of
//! candidate offsets against the match's descriptors, and reads a sub-pixel
//! displacement out of the score map with a softargmax. Supervision comes
//! from two-view epipolar geometry alone, so no sub-pixel ground truth is
//! ever needed at training time.
//!
//! Module layout:
//!
//! * [`geometry`]: calibrated two-view geometry (essential matrices,
//!   epipolar error and loss, pose decomposition, pose-error metrics).
//! * [`tensor`]: the minimal dense-tensor kernels the network needs, each
//!   with a hand-written backward pass, plus Adam and a finite-difference
//!   gradient checker.
//! * [`net`]: patch extraction, the five-layer shared-weight convnet, the
//!   score-map variants, and the displacement head.
//! * [`synth`]: deterministic synthetic two-view correspondence generator
//!   with exact ground-truth geometry.
//! * [`train`]: batching, the clamped epipolar objective, and the Adam
//!   training loop.
//! * [`estimator`]: eight-point solver inside a seeded MSAC RANSAC loop,
//!   used by the evaluation pipeline.
//!
//! The crate is `no_std` compatible (it needs only `alloc`); everything
//! that touches files, terminals, or argument parsing lives in the `subpix`
//! command-line crate instead.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod estimator;
pub mod geometry;
pub mod net;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;

mod num;

pub use num::Real;
