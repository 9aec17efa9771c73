//! Soft argmax over a square score map.
//!
//! The map's cells are indexed by integer offsets u ∈ {-⌊P/2⌋, …, ⌊P/2⌋}²
//! around the center cell. The soft argmax is the expectation of u under the
//! softmax of the scores, so it is a convex combination of grid offsets and
//! can never leave the grid. It is also invariant to adding a constant to
//! every score, which downstream code relies on (descriptor dot products
//! come with arbitrary shared offsets).

use alloc::vec::Vec;

use super::{Tensor, TensorError};
use crate::Real;

/// A square grid of matching scores around a keypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap<T> {
    side: usize,
    values: Vec<T>,
}

impl<T: Real> ScoreMap<T> {
    pub fn new(side: usize, values: Vec<T>) -> Result<Self, TensorError> {
        if side == 0 || side % 2 == 0 {
            return Err(TensorError::BadScoreMapSide(side));
        }
        if values.len() != side * side {
            return Err(TensorError::LengthMismatch {
                context: "score map",
                params: values.len(),
                buffer: side * side,
            });
        }
        if values.iter().any(|v| !v.into_f64().is_finite()) {
            return Err(TensorError::NonFiniteScores);
        }
        Ok(Self { side, values })
    }

    /// Reinterpret a single-channel square tensor as a score map.
    pub fn from_tensor(t: &Tensor<T>) -> Result<Self, TensorError> {
        if t.c != 1 || t.h != t.w {
            return Err(TensorError::ShapeMismatch {
                context: "score map from tensor",
                expected: (1, t.h, t.h),
                got: t.shape(),
            });
        }
        Self::new(t.h, t.data.clone())
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Integer offset range: ⌊P/2⌋.
    pub fn half(&self) -> i64 {
        (self.side / 2) as i64
    }
}

/// Softmax probabilities of the map, with max-subtraction for stability.
fn softmax<T: Real>(s: &ScoreMap<T>) -> Vec<T> {
    let max = s
        .values
        .iter()
        .copied()
        .fold(T::from_f64(f64::NEG_INFINITY), T::max);
    let mut out: Vec<T> = s.values.iter().map(|&v| (v - max).exp()).collect();
    let z: T = out.iter().copied().sum();
    for v in &mut out {
        *v /= z;
    }
    out
}

/// Expected offset (x, y) under the softmax of the scores.
pub fn softargmax2d<T: Real>(s: &ScoreMap<T>) -> [T; 2] {
    let p = softmax(s);
    let half = s.half();
    let mut ex = T::default();
    let mut ey = T::default();
    for row in 0..s.side {
        let uy = T::from_f64((row as i64 - half) as f64);
        for col in 0..s.side {
            let ux = T::from_f64((col as i64 - half) as f64);
            let w = p[row * s.side + col];
            ex += w * ux;
            ey += w * uy;
        }
    }
    [ex, ey]
}

/// Backward pass of [`softargmax2d`].
///
/// With p the softmax and m the forward output, the derivative of the
/// expectation through the softmax collapses to
///
/// ```text
/// dL/dS[v] = p[v] · ((vx - mx)·gx + (vy - my)·gy)
/// ```
///
/// the usual covariance form. Returned in score-map layout.
pub fn softargmax2d_backward<T: Real>(s: &ScoreMap<T>, grad_out: [T; 2]) -> Vec<T> {
    let p = softmax(s);
    let [mx, my] = softargmax2d(s);
    let half = s.half();
    let mut out = Vec::with_capacity(p.len());
    for row in 0..s.side {
        let vy = T::from_f64((row as i64 - half) as f64);
        for col in 0..s.side {
            let vx = T::from_f64((col as i64 - half) as f64);
            let w = p[row * s.side + col];
            out.push(w * ((vx - mx) * grad_out[0] + (vy - my) * grad_out[1]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::Rng;

    #[test]
    fn constant_map_centers() {
        for side in [3usize, 5, 11] {
            let s = ScoreMap::new(side, vec![0.7f64; side * side]).unwrap();
            let [x, y] = softargmax2d(&s);
            assert!(x.abs() < 1e-12 && y.abs() < 1e-12);
        }
    }

    #[test]
    fn sharp_corner_peak_lands_on_the_corner() {
        let mut v = vec![0.0f64; 25];
        v[24] = 50.0;
        let s = ScoreMap::new(5, v).unwrap();
        let [x, y] = softargmax2d(&s);
        assert!((x - 2.0).abs() < 1e-8);
        assert!((y - 2.0).abs() < 1e-8);
    }

    #[test]
    fn point_symmetric_map_centers() {
        // Symmetric under 180 degree rotation: v[i] == v[n-1-i].
        let half: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut v = half.clone();
        v.push(2.0);
        v.extend(half.iter().rev());
        let s = ScoreMap::new(5, v).unwrap();
        let [x, y] = softargmax2d(&s);
        assert!(x.abs() < 1e-12 && y.abs() < 1e-12);
    }

    #[test]
    fn output_stays_on_the_grid() {
        let mut rng = crate::rng::stream_rng(11, crate::rng::Stream::WeightInit, 0);
        for _ in 0..200 {
            let v: Vec<f64> = (0..121).map(|_| rng.gen_range(-30.0..30.0)).collect();
            let s = ScoreMap::new(11, v).unwrap();
            let [x, y] = softargmax2d(&s);
            assert!(x.abs() <= 5.0 && y.abs() <= 5.0);
        }
    }

    #[test]
    fn shift_invariance() {
        let mut rng = crate::rng::stream_rng(12, crate::rng::Stream::WeightInit, 1);
        let v: Vec<f64> = (0..49).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let s = ScoreMap::new(7, v.clone()).unwrap();
        let shifted = ScoreMap::new(7, v.iter().map(|x| x + 123.456).collect()).unwrap();
        let a = softargmax2d(&s);
        let b = softargmax2d(&shifted);
        assert!((a[0] - b[0]).abs() < 1e-9);
        assert!((a[1] - b[1]).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_finite_and_even_sides() {
        assert!(matches!(
            ScoreMap::new(4, vec![0.0f64; 16]),
            Err(TensorError::BadScoreMapSide(4))
        ));
        assert!(matches!(
            ScoreMap::new(3, vec![0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            Err(TensorError::NonFiniteScores)
        ));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = crate::rng::stream_rng(13, crate::rng::Stream::WeightInit, 2);
        let v: Vec<f64> = (0..25).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let s = ScoreMap::new(5, v.clone()).unwrap();
        let g = [0.8, -1.3];
        let grad = softargmax2d_backward(&s, g);
        let loss = |vals: &[f64]| -> f64 {
            let sm = ScoreMap::new(5, vals.to_vec()).unwrap();
            let [x, y] = softargmax2d(&sm);
            x * g[0] + y * g[1]
        };
        let h = 1e-6;
        for i in 0..25 {
            let mut plus = v.clone();
            let mut minus = v.clone();
            plus[i] += h;
            minus[i] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-12);
            assert!(rel < 1e-6, "score {i}: {} vs {numeric}", grad[i]);
        }
    }
}
