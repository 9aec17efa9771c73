//! Summary statistics over per-pair pose errors.

use alloc::vec::Vec;

use super::types::GeometryError;

/// Pose error recorded for a pair whose estimation failed outright. 180
/// degrees is the worst possible angle, so failures sink the AUC instead of
/// silently vanishing from it.
pub const FAILED_POSE_ERROR_DEG: f64 = 180.0;

/// Area under the recall curve of `errors` up to `max_err`, normalized to
/// [0, 1].
///
/// Recall(θ) is the fraction of pairs with error strictly below θ. The curve
/// is a step function, so the area is an exact sum of rectangles, one per gap
/// between consecutive sorted errors. No trapezoids, no sampling grid.
pub fn auc(errors: &[f64], max_err: f64) -> Result<f64, GeometryError> {
    if errors.is_empty() {
        return Err(GeometryError::EmptyErrors);
    }
    if !(max_err > 0.0) || !max_err.is_finite() {
        return Err(GeometryError::BadThreshold);
    }
    let mut sorted: Vec<f64> = errors.iter().map(|e| e.max(0.0)).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("pose errors must not be NaN"));
    let n = sorted.len() as f64;

    // Walk the step function left to right. After passing i errors the
    // recall is i/n; that value holds from the i-th error to the next one.
    let mut area = 0.0;
    let mut prev = 0.0;
    for (i, &e) in sorted.iter().enumerate() {
        let edge = e.min(max_err);
        area += (edge - prev) * (i as f64 / n);
        prev = edge;
        if e >= max_err {
            break;
        }
    }
    area += (max_err - prev) * (sorted.iter().filter(|&&e| e <= max_err).count() as f64 / n);
    Ok(area / max_err)
}

/// Median with the usual even-count average of the two middle values.
pub fn median(values: &[f64]) -> Result<f64, GeometryError> {
    if values.is_empty() {
        return Err(GeometryError::EmptyErrors);
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("values must not be NaN"));
    let n = sorted.len();
    if n % 2 == 1 {
        Ok(sorted[n / 2])
    } else {
        Ok((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_error_at_half_threshold() {
        // One pair with error 2.5 under a 5-degree cap: recall jumps from 0
        // to 1 at 2.5, so the area is 2.5/5 = 0.5.
        assert!((auc(&[2.5], 5.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_error_gives_perfect_auc() {
        assert_eq!(auc(&[0.0, 0.0], 10.0).unwrap(), 1.0);
    }

    #[test]
    fn all_errors_beyond_cap_give_zero() {
        assert_eq!(auc(&[30.0, 180.0], 20.0).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_two_error_case() {
        // Errors 1 and 3 under cap 5. Recall: 0 on [0,1), 1/2 on [1,3),
        // 1 on [3,5]. Area = 0 + 2*(1/2) + 2*1 = 3, normalized 3/5.
        assert!((auc(&[1.0, 3.0], 5.0).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn error_exactly_at_cap_contributes_nothing() {
        // Recall counts errors strictly below θ, so an error equal to the
        // cap never enters the integral.
        assert_eq!(auc(&[5.0], 5.0).unwrap(), 0.0);
        assert_eq!(auc(&[5.0, 5.0], 5.0).unwrap(), 0.0);
        // Error 0 and 5: recall 1/2 over the whole range.
        assert!((auc(&[0.0, 5.0], 5.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn auc_is_monotone_in_improvements() {
        let worse = [1.0, 4.0, 9.0, 180.0];
        let better = [0.5, 2.0, 4.0, 12.0];
        for cap in [5.0, 10.0, 20.0] {
            assert!(auc(&better, cap).unwrap() >= auc(&worse, cap).unwrap());
        }
    }

    #[test]
    fn empty_errors_rejected() {
        assert_eq!(auc(&[], 5.0).unwrap_err(), GeometryError::EmptyErrors);
        assert_eq!(median(&[]).unwrap_err(), GeometryError::EmptyErrors);
    }

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert_eq!(median(&[7.0]).unwrap(), 7.0);
    }
}
