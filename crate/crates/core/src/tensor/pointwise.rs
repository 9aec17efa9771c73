//! Elementwise and per-location operations: ReLU and channel L2
//! normalization.

use super::{Tensor, TensorError};
use crate::Real;

/// Elementwise max(0, x).
pub fn relu<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    Tensor {
        c: input.c,
        h: input.h,
        w: input.w,
        data: input.data.iter().map(|&v| v.max(T::default())).collect(),
    }
}

/// ReLU backward. The gradient at exactly zero is zero; the mask is x > 0,
/// not x >= 0, and tests depend on that choice.
pub fn relu_backward<T: Real>(
    input: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    if input.shape() != grad_out.shape() {
        return Err(TensorError::ShapeMismatch {
            context: "relu_backward",
            expected: input.shape(),
            got: grad_out.shape(),
        });
    }
    Ok(Tensor {
        c: input.c,
        h: input.h,
        w: input.w,
        data: input
            .data
            .iter()
            .zip(&grad_out.data)
            .map(|(&x, &g)| if x > T::default() { g } else { T::default() })
            .collect(),
    })
}

/// L2-normalize the channel vector at every spatial location.
///
/// Each D-vector is divided by max(norm, eps), so zero vectors pass through
/// unchanged instead of exploding, output norms never exceed 1, and any
/// location with norm at least eps comes out exactly unit length.
pub fn l2_normalize_channels<T: Real>(input: &Tensor<T>, eps: T) -> Tensor<T> {
    let mut out = Tensor::zeros(input.c, input.h, input.w);
    let plane = input.h * input.w;
    for s in 0..plane {
        let mut sq = T::default();
        for c in 0..input.c {
            let v = input.data[c * plane + s];
            sq += v * v;
        }
        let scale = T::from_f64(1.0) / sq.sqrt().max(eps);
        for c in 0..input.c {
            out.data[c * plane + s] = input.data[c * plane + s] * scale;
        }
    }
    out
}

/// Backward pass of [`l2_normalize_channels`].
///
/// Above the eps floor the map is x/‖x‖ and the Jacobian-vector product is
/// (g - y(y·g))/‖x‖ with y the normalized output. At or below the floor the
/// map is the linear x/eps.
pub fn l2_normalize_channels_backward<T: Real>(
    input: &Tensor<T>,
    eps: T,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    if input.shape() != grad_out.shape() {
        return Err(TensorError::ShapeMismatch {
            context: "l2_normalize_channels_backward",
            expected: input.shape(),
            got: grad_out.shape(),
        });
    }
    let mut out = Tensor::zeros(input.c, input.h, input.w);
    let plane = input.h * input.w;
    for s in 0..plane {
        let mut sq = T::default();
        for c in 0..input.c {
            let v = input.data[c * plane + s];
            sq += v * v;
        }
        let norm = sq.sqrt();
        if norm > eps {
            let inv = T::from_f64(1.0) / norm;
            let mut dot = T::default();
            for c in 0..input.c {
                dot += input.data[c * plane + s] * inv * grad_out.data[c * plane + s];
            }
            for c in 0..input.c {
                let y = input.data[c * plane + s] * inv;
                out.data[c * plane + s] = (grad_out.data[c * plane + s] - y * dot) * inv;
            }
        } else {
            let inv = T::from_f64(1.0) / eps;
            for c in 0..input.c {
                out.data[c * plane + s] = grad_out.data[c * plane + s] * inv;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use rand::Rng;

    #[test]
    fn relu_clamps_negatives_and_zero() {
        let t = Tensor::from_vec(1, 1, 3, vec![-1.0, 0.0, 2.0]);
        assert_eq!(relu(&t).data, vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_backward_masks_at_zero() {
        let t = Tensor::from_vec(1, 1, 3, vec![-1.0, 0.0, 2.0]);
        let g = Tensor::from_vec(1, 1, 3, vec![1.0, 1.0, 1.0]);
        assert_eq!(relu_backward(&t, &g).unwrap().data, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn relu_backward_matches_finite_differences_away_from_zero() {
        let t = Tensor::from_vec(1, 1, 4, vec![-0.7, 0.3, 1.9, -2.2]);
        let g = Tensor::from_vec(1, 1, 4, vec![0.5, -1.0, 2.0, 0.25]);
        let gi = relu_backward(&t, &g).unwrap();
        let loss = |x: &Tensor<f64>| -> f64 {
            relu(x).data.iter().zip(&g.data).map(|(o, w)| o * w).sum()
        };
        let h = 1e-6;
        for i in 0..4 {
            let mut plus = t.clone();
            let mut minus = t.clone();
            plus.data[i] += h;
            minus.data[i] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let rel = (gi.data[i] - numeric).abs() / gi.data[i].abs().max(numeric.abs()).max(1e-12);
            assert!(rel < 1e-6);
        }
    }

    #[test]
    fn three_four_five_triangle() {
        // Two channels, one location holding the vector (3, 4).
        let t = Tensor::from_vec(2, 1, 1, vec![3.0f64, 4.0]);
        let n = l2_normalize_channels(&t, 1e-8);
        assert!((n.data[0] - 0.6).abs() < 1e-15);
        assert!((n.data[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_vector_survives_eps_guard() {
        let t = Tensor::from_vec(3, 1, 1, vec![0.0; 3]);
        let n = l2_normalize_channels(&t, 1e-8);
        assert_eq!(n.data, vec![0.0; 3]);
    }

    #[test]
    fn norms_are_bounded_by_one_and_unit_above_eps() {
        let mut rng = crate::rng::stream_rng(3, crate::rng::Stream::WeightInit, 0);
        let data: Vec<f64> = (0..8 * 4 * 4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let t = Tensor::from_vec(8, 4, 4, data);
        let n = l2_normalize_channels(&t, 1e-8);
        for s in 0..16 {
            let norm: f64 = (0..8).map(|c| n.data[c * 16 + s].powi(2)).sum::<f64>().sqrt();
            assert!(norm <= 1.0 + 1e-12);
            assert!((norm - 1.0).abs() < 1e-12, "inputs here are far above eps");
        }
    }

    #[test]
    fn normalize_backward_matches_finite_differences() {
        let mut rng = crate::rng::stream_rng(4, crate::rng::Stream::WeightInit, 1);
        let data: Vec<f64> = (0..6 * 2 * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let weights: Vec<f64> = (0..6 * 2 * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = Tensor::from_vec(6, 2, 2, data);
        let g = Tensor::from_vec(6, 2, 2, weights.clone());
        let eps = 1e-8;
        let gi = l2_normalize_channels_backward(&t, eps, &g).unwrap();
        let loss = |x: &Tensor<f64>| -> f64 {
            l2_normalize_channels(x, eps)
                .data
                .iter()
                .zip(&weights)
                .map(|(o, w)| o * w)
                .sum()
        };
        let h = 1e-6;
        for i in 0..t.data.len() {
            let mut plus = t.clone();
            let mut minus = t.clone();
            plus.data[i] += h;
            minus.data[i] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let rel = (gi.data[i] - numeric).abs() / gi.data[i].abs().max(numeric.abs()).max(1e-12);
            assert!(rel < 1e-4, "component {i}: {} vs {numeric}", gi.data[i]);
        }
    }
}
