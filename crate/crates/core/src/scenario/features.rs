//! Model inputs: sliding windows of estimated phasors.

use crate::linalg::{ComplexMatrix, C64};

pub const DEFAULT_WINDOW: usize = 10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FeatureError {
    #[error("window ending at t={t} with length {window} and horizon {horizon} does not fit in {t_total} hours")]
    WindowOutOfRange {
        t: usize,
        window: usize,
        horizon: usize,
        t_total: usize,
    },
}

/// `[N × window]` matrix whose column `c` holds the estimates at hour
/// `t - window + 1 + c`; the last column is hour `t`.
pub fn feature_window(estimates: &[Vec<C64>], t: usize, window: usize) -> Result<ComplexMatrix, FeatureError> {
    if window == 0 || t + 1 < window || t >= estimates.len() {
        return Err(FeatureError::WindowOutOfRange {
            t,
            window,
            horizon: 0,
            t_total: estimates.len(),
        });
    }
    let n = estimates[t].len();
    let start = t + 1 - window;
    Ok(ComplexMatrix::from_fn(n, window, |i, c| estimates[start + c][i]))
}

/// Input window ending at `t` and the true state `horizon` hours later.
pub fn build_features(
    estimates: &[Vec<C64>],
    truth: &[Vec<C64>],
    t: usize,
    window: usize,
    horizon: usize,
) -> Result<(ComplexMatrix, Vec<C64>), FeatureError> {
    let t_total = estimates.len().min(truth.len());
    if window == 0 || t + 1 < window || t + horizon >= t_total {
        return Err(FeatureError::WindowOutOfRange {
            t,
            window,
            horizon,
            t_total,
        });
    }
    Ok((feature_window(estimates, t, window)?, truth[t + horizon].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(t: usize, n: usize) -> Vec<Vec<C64>> {
        (0..t)
            .map(|h| (0..n).map(|i| C64::new(h as f64, i as f64)).collect())
            .collect()
    }

    #[test]
    fn shapes_and_targets() {
        let s = series(30, 4);
        let (x, y) = build_features(&s, &s, 12, 10, 0).unwrap();
        assert_eq!((x.rows(), x.cols()), (4, 10));
        assert_eq!(x[(2, 9)], C64::new(12.0, 2.0));
        assert_eq!(x[(2, 0)], C64::new(3.0, 2.0));
        assert_eq!(y, s[12]);
        let (_, y5) = build_features(&s, &s, 12, 10, 5).unwrap();
        assert_eq!(y5, s[17]);
    }

    #[test]
    fn out_of_range() {
        let s = series(30, 4);
        assert!(matches!(
            build_features(&s, &s, 5, 10, 0),
            Err(FeatureError::WindowOutOfRange { .. })
        ));
        assert!(build_features(&s, &s, 25, 10, 5).is_err());
        assert!(build_features(&s, &s, 24, 10, 5).is_ok());
    }
}
