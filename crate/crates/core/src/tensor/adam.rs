//! Adam optimizer over a flat parameter vector.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use super::TensorError;
use crate::Real;

/// Adam hyperparameters. The defaults are the conventional ones except the
/// learning rate, which this project always runs at 1e-4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter first and second moments plus the shared step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(param_count: usize) -> Self {
        Self {
            m: vec![T::default(); param_count],
            v: vec![T::default(); param_count],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
///
/// Deterministic: identical params, grads, state, and config produce
/// bit-identical results, which checkpoint resume tests rely on.
pub fn adam_step<T: Real>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<(), TensorError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TensorError::LengthMismatch {
            context: "adam_step",
            params: params.len(),
            buffer: grads.len().min(state.m.len()),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one = T::from_f64(1.0);
    // Fold the bias corrections into the learning rate once per step.
    let corr1 = 1.0 - cfg.beta1.powi(t);
    let corr2 = 1.0 - cfg.beta2.powi(t);
    let alpha = T::from_f64(cfg.lr * corr2.sqrt() / corr1);
    let eps = T::from_f64(cfg.eps * corr2.sqrt());

    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (one - b1) * g;
        state.v[i] = b2 * state.v[i] + (one - b2) * g * g;
        params[i] -= alpha * state.m[i] / (state.v[i].sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_alone() {
        let mut p = vec![0.5f64, -1.25, 3.0];
        let g = vec![0.0; 3];
        let mut st = AdamState::new(3);
        adam_step(&mut p, &g, &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![0.5, -1.25, 3.0]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // Gradients well above eps; at |g| near eps the eps term visibly
        // shrinks the step and the sign identity no longer holds tightly.
        let cfg = AdamConfig::default();
        let mut p = vec![1.0f64, 1.0, 1.0];
        let g = vec![0.3, -2.0, 0.05];
        let mut st = AdamState::new(3);
        adam_step(&mut p, &g, &mut st, &cfg).unwrap();
        for (i, &gi) in g.iter().enumerate() {
            let moved = p[i] - 1.0;
            let expected = -cfg.lr * gi.signum();
            assert!(
                (moved - expected).abs() < 1e-6 * cfg.lr,
                "param {i}: moved {moved}, expected {expected}"
            );
        }
    }

    #[test]
    fn two_steps_match_a_scalar_reference() {
        // Longhand scalar Adam, no folded corrections, f64 throughout.
        let (lr, b1, b2, eps) = (1e-4f64, 0.9, 0.999, 1e-8);
        let g = 0.7f64;
        let mut p_ref = 2.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            p_ref -= lr * m_hat / (v_hat.sqrt() + eps);
        }

        let mut p = vec![2.0f64];
        let mut st = AdamState::new(1);
        let cfg = AdamConfig::default();
        adam_step(&mut p, &[g], &mut st, &cfg).unwrap();
        adam_step(&mut p, &[g], &mut st, &cfg).unwrap();
        // The folded form multiplies eps by sqrt(corr2), so the two
        // formulations agree closely but not bit-exactly.
        assert!((p[0] - p_ref).abs() < 1e-10, "{} vs {p_ref}", p[0]);
        assert_eq!(st.step, 2);
    }

    #[test]
    fn update_is_bit_deterministic() {
        let mut p1 = vec![0.1f32, -0.4, 2.5, 0.0];
        let mut p2 = p1.clone();
        let g = vec![0.02f32, 1.3, -0.7, 0.5];
        let mut s1 = AdamState::new(4);
        let mut s2 = AdamState::new(4);
        let cfg = AdamConfig::default();
        for _ in 0..5 {
            adam_step(&mut p1, &g, &mut s1, &cfg).unwrap();
            adam_step(&mut p2, &g, &mut s2, &cfg).unwrap();
        }
        for i in 0..4 {
            assert_eq!(p1[i].to_bits(), p2[i].to_bits());
            assert_eq!(s1.m[i].to_bits(), s2.m[i].to_bits());
            assert_eq!(s1.v[i].to_bits(), s2.v[i].to_bits());
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let mut p = vec![1.0f64; 3];
        let g = vec![0.0f64; 2];
        let mut st = AdamState::new(3);
        assert!(matches!(
            adam_step(&mut p, &g, &mut st, &AdamConfig::default()),
            Err(TensorError::LengthMismatch { .. })
        ));
    }
}
