//! Central finite-difference gradient checking.
//!
//! Every hand-written backward pass in this crate answers to this harness.
//! It only makes sense in double precision: with step h = 1e-5 the truncation
//! error is O(h²) = 1e-10, far below the 1e-4 acceptance bar, while in single
//! precision the subtraction alone would eat the budget.

use crate::Real;

/// Compare an analytic gradient against central finite differences of `f`.
///
/// For each parameter the numeric derivative is (f(x+h) - f(x-h)) / 2h and
/// the reported figure is the worst relative error, with the denominator
/// floored as max(|analytic|, |numeric|, 1e-12) so agreeing near-zero pairs
/// do not divide by nothing.
///
/// `f` is called with the perturbed parameter slice and must be a pure
/// deterministic function of it. The slice is restored after each probe.
pub fn finite_diff_check<T, F>(mut f: F, params: &mut [T], analytic: &[T], step: f64) -> f64
where
    T: Real,
    F: FnMut(&[T]) -> f64,
{
    assert_eq!(
        params.len(),
        analytic.len(),
        "analytic gradient length vs parameter count"
    );
    let h = T::from_f64(step);
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let saved = params[i];
        params[i] = saved + h;
        let plus = f(params);
        params[i] = saved - h;
        let minus = f(params);
        params[i] = saved;
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic[i].into_f64();
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
        if rel > worst {
            worst = rel;
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn quadratic_gradient_is_exact_up_to_roundoff() {
        let mut x: Vec<f64> = alloc::vec![0.3, -1.7, 2.2, 0.0];
        let analytic: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let rel = finite_diff_check(
            |p| p.iter().map(|v| v * v).sum(),
            &mut x,
            &analytic,
            1e-5,
        );
        assert!(rel < 1e-9, "rel-err {rel}");
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let mut x: Vec<f64> = alloc::vec![0.5, -0.8, 1.3];
        let corrupted: Vec<f64> = x.iter().map(|v| 2.0 * v * 1.1).collect();
        let rel = finite_diff_check(
            |p| p.iter().map(|v| v * v).sum(),
            &mut x,
            &corrupted,
            1e-5,
        );
        assert!((rel - 0.1f64 / 1.1).abs() < 1e-3, "rel-err {rel}");
    }

    #[test]
    fn parameters_are_restored_after_probing() {
        let mut x: Vec<f64> = alloc::vec![1.0, 2.0];
        let analytic = alloc::vec![1.0, 1.0];
        finite_diff_check(|p| p.iter().sum(), &mut x, &analytic, 1e-5);
        assert_eq!(x, alloc::vec![1.0, 2.0]);
    }
}
