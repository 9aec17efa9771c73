//! 3x3 convolution, forward and backward.
//!
//! Same-mode convolution is implemented as zero padding followed by the
//! valid-mode kernel, for both directions. That costs one copy of the input
//! but keeps exactly one inner loop to get right, and that loop is written
//! as an axpy over output rows so the compiler can vectorize it.

use alloc::vec;
use alloc::vec::Vec;

use super::{Tensor, TensorError};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// No padding; output shrinks by 2 per spatial dimension.
    Valid,
    /// Zero padding; output keeps the input's spatial size.
    Same,
}

/// Weights of one 3x3 convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T> {
    pub out_c: usize,
    pub in_c: usize,
    /// (out_c, in_c, 3, 3), row-major.
    pub kernels: Vec<T>,
    /// (out_c)
    pub bias: Vec<T>,
    pub padding: Padding,
}

impl<T: Real> ConvParams<T> {
    pub fn zeros(out_c: usize, in_c: usize, padding: Padding) -> Self {
        Self {
            out_c,
            in_c,
            kernels: vec![T::default(); out_c * in_c * 9],
            bias: vec![T::default(); out_c],
            padding,
        }
    }

    #[inline]
    fn k(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> T {
        self.kernels[((oc * self.in_c + ic) * 3 + ky) * 3 + kx]
    }

    pub fn cast<U: Real>(&self) -> ConvParams<U> {
        ConvParams {
            out_c: self.out_c,
            in_c: self.in_c,
            kernels: self.kernels.iter().map(|v| U::from_f64(v.into_f64())).collect(),
            bias: self.bias.iter().map(|v| U::from_f64(v.into_f64())).collect(),
            padding: self.padding,
        }
    }
}

/// Gradients of one layer's weights, same layout as [`ConvParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub kernels: Vec<T>,
    pub bias: Vec<T>,
}

fn check_shapes<T: Real>(input: &Tensor<T>, params: &ConvParams<T>) -> Result<(), TensorError> {
    if input.c != params.in_c {
        return Err(TensorError::ShapeMismatch {
            context: "conv2d input channels",
            expected: (params.in_c, input.h, input.w),
            got: input.shape(),
        });
    }
    if params.kernels.len() != params.out_c * params.in_c * 9
        || params.bias.len() != params.out_c
    {
        return Err(TensorError::LengthMismatch {
            context: "conv2d params",
            params: params.kernels.len(),
            buffer: params.out_c * params.in_c * 9,
        });
    }
    if params.padding == Padding::Valid && (input.h < 3 || input.w < 3) {
        return Err(TensorError::InputTooSmall {
            h: input.h,
            w: input.w,
        });
    }
    Ok(())
}

fn pad_zero<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    let mut out = Tensor::zeros(input.c, input.h + 2, input.w + 2);
    for c in 0..input.c {
        for y in 0..input.h {
            let src = &input.data[(c * input.h + y) * input.w..][..input.w];
            let dst_off = (c * out.h + y + 1) * out.w + 1;
            out.data[dst_off..dst_off + input.w].copy_from_slice(src);
        }
    }
    out
}

/// Valid-mode convolution of a (possibly padded) input.
fn conv_valid<T: Real>(input: &Tensor<T>, params: &ConvParams<T>) -> Tensor<T> {
    let out_h = input.h - 2;
    let out_w = input.w - 2;
    let mut out = Tensor::zeros(params.out_c, out_h, out_w);
    for oc in 0..params.out_c {
        let plane = &mut out.data[oc * out_h * out_w..(oc + 1) * out_h * out_w];
        plane.fill(params.bias[oc]);
        for ic in 0..params.in_c {
            for ky in 0..3 {
                for kx in 0..3 {
                    let k = params.k(oc, ic, ky, kx);
                    if k == T::default() {
                        continue;
                    }
                    for oy in 0..out_h {
                        let src =
                            &input.data[(ic * input.h + oy + ky) * input.w + kx..][..out_w];
                        let dst = &mut plane[oy * out_w..][..out_w];
                        for x in 0..out_w {
                            dst[x] += k * src[x];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Convolve `input` with the layer's 3x3 kernels.
///
/// Valid mode maps (C, H, W) to (out_c, H-2, W-2); same mode keeps the
/// spatial size using zero padding.
pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
) -> Result<Tensor<T>, TensorError> {
    check_shapes(input, params)?;
    match params.padding {
        Padding::Valid => Ok(conv_valid(input, params)),
        Padding::Same => Ok(conv_valid(&pad_zero(input), params)),
    }
}

/// Backward pass: gradients with respect to the input and the weights.
///
/// `grad_out` must have the forward output's shape. The input gradient is
/// computed by scattering each output gradient through the kernel (the
/// transpose of the forward gather), on the padded grid for same mode and
/// cropped back afterwards.
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, ConvGrads<T>), TensorError> {
    check_shapes(input, params)?;
    let padded;
    let work: &Tensor<T> = match params.padding {
        Padding::Valid => input,
        Padding::Same => {
            padded = pad_zero(input);
            &padded
        }
    };
    let out_h = work.h - 2;
    let out_w = work.w - 2;
    if grad_out.shape() != (params.out_c, out_h, out_w) {
        return Err(TensorError::ShapeMismatch {
            context: "conv2d grad_out",
            expected: (params.out_c, out_h, out_w),
            got: grad_out.shape(),
        });
    }

    let mut grad_work = Tensor::zeros(work.c, work.h, work.w);
    let mut grads = ConvGrads {
        kernels: vec![T::default(); params.kernels.len()],
        bias: vec![T::default(); params.out_c],
    };

    for oc in 0..params.out_c {
        let gplane = grad_out.channel(oc);
        grads.bias[oc] = gplane.iter().copied().sum();
        for ic in 0..params.in_c {
            for ky in 0..3 {
                for kx in 0..3 {
                    let k = params.k(oc, ic, ky, kx);
                    let mut kgrad = T::default();
                    for oy in 0..out_h {
                        let g = &gplane[oy * out_w..][..out_w];
                        let src_off = (ic * work.h + oy + ky) * work.w + kx;
                        let src = &work.data[src_off..][..out_w];
                        let dst = &mut grad_work.data[src_off..][..out_w];
                        for x in 0..out_w {
                            kgrad += g[x] * src[x];
                            dst[x] += k * g[x];
                        }
                    }
                    grads.kernels[((oc * params.in_c + ic) * 3 + ky) * 3 + kx] += kgrad;
                }
            }
        }
    }

    let grad_input = match params.padding {
        Padding::Valid => grad_work,
        Padding::Same => {
            // Drop the padding ring; those cells were zeros the forward pass
            // invented, not real inputs.
            let mut cropped = Tensor::zeros(input.c, input.h, input.w);
            for c in 0..input.c {
                for y in 0..input.h {
                    let src_off = (c * grad_work.h + y + 1) * grad_work.w + 1;
                    let dst_off = (c * input.h + y) * input.w;
                    cropped.data[dst_off..dst_off + input.w]
                        .copy_from_slice(&grad_work.data[src_off..src_off + input.w]);
                }
            }
            cropped
        }
    };

    Ok((grad_input, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use rand::Rng;

    fn random_tensor(c: usize, h: usize, w: usize, idx: u64) -> Tensor<f64> {
        let mut rng = stream_rng(99, Stream::WeightInit, idx);
        Tensor::from_vec(c, h, w, (0..c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    fn random_params(out_c: usize, in_c: usize, padding: Padding, idx: u64) -> ConvParams<f64> {
        let mut rng = stream_rng(7, Stream::WeightInit, idx);
        ConvParams {
            out_c,
            in_c,
            kernels: (0..out_c * in_c * 9).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            bias: (0..out_c).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            padding,
        }
    }

    /// Direct quadruple-loop convolution, written as differently from the
    /// production kernel as possible.
    fn reference_conv(input: &Tensor<f64>, params: &ConvParams<f64>) -> Tensor<f64> {
        let (pad, out_h, out_w) = match params.padding {
            Padding::Valid => (0i64, input.h - 2, input.w - 2),
            Padding::Same => (1i64, input.h, input.w),
        };
        let mut out = Tensor::zeros(params.out_c, out_h, out_w);
        for oc in 0..params.out_c {
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let mut acc = params.bias[oc];
                    for ic in 0..params.in_c {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = oy as i64 + ky as i64 - pad;
                                let ix = ox as i64 + kx as i64 - pad;
                                if iy < 0
                                    || ix < 0
                                    || iy >= input.h as i64
                                    || ix >= input.w as i64
                                {
                                    continue;
                                }
                                acc += params.k(oc, ic, ky, kx)
                                    * input.at(ic, iy as usize, ix as usize);
                            }
                        }
                    }
                    *out.at_mut(oc, oy, ox) = acc;
                }
            }
        }
        out
    }

    #[test]
    fn ones_kernel_sums_the_window() {
        let input = Tensor::from_vec(1, 3, 3, vec![1.0; 9]);
        let params = ConvParams {
            out_c: 1,
            in_c: 1,
            kernels: vec![1.0; 9],
            bias: vec![0.0],
            padding: Padding::Valid,
        };
        let out = conv2d_forward(&input, &params).unwrap();
        assert_eq!(out.shape(), (1, 1, 1));
        assert_eq!(out.data[0], 9.0);
    }

    #[test]
    fn identity_kernel_same_padding_is_identity() {
        let input = random_tensor(2, 5, 4, 1);
        let mut params = ConvParams::zeros(2, 2, Padding::Same);
        // Kernel center for matching in/out channel pairs.
        for c in 0..2 {
            params.kernels[((c * 2 + c) * 3 + 1) * 3 + 1] = 1.0;
        }
        let out = conv2d_forward(&input, &params).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn valid_output_shrinks_by_two() {
        let input = random_tensor(3, 11, 11, 2);
        let params = random_params(4, 3, Padding::Valid, 2);
        let out = conv2d_forward(&input, &params).unwrap();
        assert_eq!(out.shape(), (4, 9, 9));
    }

    #[test]
    fn matches_reference_convolution() {
        for (idx, padding) in [(3, Padding::Valid), (4, Padding::Same)] {
            let input = random_tensor(3, 7, 6, idx);
            let params = random_params(5, 3, padding, idx);
            let fast = conv2d_forward(&input, &params).unwrap();
            let slow = reference_conv(&input, &params);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data.iter().zip(&slow.data) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_undersized_valid_input() {
        let input = random_tensor(1, 2, 5, 5);
        let params = random_params(1, 1, Padding::Valid, 5);
        assert!(matches!(
            conv2d_forward(&input, &params),
            Err(TensorError::InputTooSmall { h: 2, w: 5 })
        ));
    }

    #[test]
    fn rejects_channel_mismatch() {
        let input = random_tensor(2, 5, 5, 6);
        let params = random_params(1, 3, Padding::Valid, 6);
        assert!(matches!(
            conv2d_forward(&input, &params),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let input = random_tensor(2, 5, 5, 7);
        let params = random_params(3, 2, Padding::Same, 7);
        let grad_out = Tensor::zeros(3, 5, 5);
        let (gi, gp) = conv2d_backward(&input, &params, &grad_out).unwrap();
        assert!(gi.data.iter().all(|&v| v == 0.0));
        assert!(gp.kernels.iter().all(|&v| v == 0.0));
        assert!(gp.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_kernel_routes_single_pixel_gradient() {
        let input = random_tensor(1, 5, 5, 8);
        let mut params = ConvParams::zeros(1, 1, Padding::Same);
        params.kernels[4] = 1.0;
        let mut grad_out = Tensor::zeros(1, 5, 5);
        *grad_out.at_mut(0, 2, 3) = 1.0;
        let (gi, _) = conv2d_backward(&input, &params, &grad_out).unwrap();
        assert_eq!(gi, grad_out);
    }

    #[test]
    fn backward_matches_finite_differences() {
        // Scalar loss: weighted sum of outputs with fixed weights, so the
        // loss gradient wrt outputs is exactly those weights.
        for padding in [Padding::Valid, Padding::Same] {
            let input = random_tensor(2, 5, 4, 9);
            let params = random_params(3, 2, padding, 9);
            let out = conv2d_forward(&input, &params).unwrap();
            let weights = random_tensor(out.c, out.h, out.w, 10);
            let loss = |inp: &Tensor<f64>, par: &ConvParams<f64>| -> f64 {
                conv2d_forward(inp, par)
                    .unwrap()
                    .data
                    .iter()
                    .zip(&weights.data)
                    .map(|(o, w)| o * w)
                    .sum()
            };
            let (gi, gp) = conv2d_backward(&input, &params, &weights).unwrap();

            let h = 1e-6;
            // Sample a few input coordinates rather than all of them; the
            // full sweep lives in the network-level gradient check.
            for i in [0usize, 7, 19, 33] {
                let mut plus = input.clone();
                let mut minus = input.clone();
                plus.data[i] += h;
                minus.data[i] -= h;
                let numeric = (loss(&plus, &params) - loss(&minus, &params)) / (2.0 * h);
                let analytic = gi.data[i];
                let rel =
                    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
                assert!(rel < 1e-7, "input grad {i}: {analytic} vs {numeric}");
            }
            for i in [0usize, 5, 26, 53] {
                let mut plus = params.clone();
                let mut minus = params.clone();
                plus.kernels[i] += h;
                minus.kernels[i] -= h;
                let numeric = (loss(&input, &plus) - loss(&input, &minus)) / (2.0 * h);
                let analytic = gp.kernels[i];
                let rel =
                    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
                assert!(rel < 1e-7, "kernel grad {i}: {analytic} vs {numeric}");
            }
            for i in 0..3 {
                let mut plus = params.clone();
                let mut minus = params.clone();
                plus.bias[i] += h;
                minus.bias[i] -= h;
                let numeric = (loss(&input, &plus) - loss(&input, &minus)) / (2.0 * h);
                let analytic = gp.bias[i];
                let rel =
                    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
                assert!(rel < 1e-7, "bias grad {i}: {analytic} vs {numeric}");
            }
        }
    }
}
