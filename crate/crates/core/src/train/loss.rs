//! Training losses. Each `*_grad` variant also returns the gradient with
//! respect to its first argument.

use crate::linalg::C64;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LossError {
    #[error("dimension mismatch: {0} predictions for {1} targets")]
    DimensionMismatch(usize, usize),
}

fn check(a: usize, b: usize) -> Result<(), LossError> {
    if a != b || a == 0 {
        return Err(LossError::DimensionMismatch(a, b));
    }
    Ok(())
}

/// `(1/N) Σ |ŷ_n − y_n|²`.
pub fn loss_forecast(pred: &[C64], target: &[C64]) -> Result<f64, LossError> {
    check(pred.len(), target.len())?;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).norm_sqr()).sum::<f64>() / pred.len() as f64)
}

/// Gradient in the `∂/∂Re + j ∂/∂Im` convention: `2 (ŷ − y) / N`.
pub fn loss_forecast_grad(pred: &[C64], target: &[C64]) -> Result<(f64, Vec<C64>), LossError> {
    let l = loss_forecast(pred, target)?;
    let s = 2.0 / pred.len() as f64;
    Ok((l, pred.iter().zip(target).map(|(p, t)| (p - t) * s).collect()))
}

/// Mean binary cross-entropy on logits, `pos_weight` scaling the positive
/// term: `w y softplus(−x) + (1 − y) softplus(x)`.
pub fn loss_fdi(logits: &[f64], labels: &[u8]) -> Result<f64, LossError> {
    loss_fdi_weighted(logits, labels, 1.0)
}

pub fn loss_fdi_weighted(logits: &[f64], labels: &[u8], pos_weight: f64) -> Result<f64, LossError> {
    loss_fdi_grad(logits, labels, pos_weight).map(|(l, _)| l)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn loss_fdi_grad(logits: &[f64], labels: &[u8], pos_weight: f64) -> Result<(f64, Vec<f64>), LossError> {
    check(logits.len(), labels.len())?;
    let n = logits.len() as f64;
    let mut l = 0.0;
    let mut g = Vec::with_capacity(logits.len());
    for (&x, &y) in logits.iter().zip(labels) {
        if y != 0 {
            l += pos_weight * softplus(-x);
            g.push(pos_weight * (sigmoid(x) - 1.0) / n);
        } else {
            l += softplus(x);
            g.push(sigmoid(x) / n);
        }
    }
    Ok((l / n, g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forecast_examples() {
        let t = vec![C64::new(1.0, 0.1); 4];
        assert_eq!(loss_forecast(&t, &t).unwrap(), 0.0);
        let mut p = t.clone();
        p[2] += C64::new(1.0, 0.0);
        assert!((loss_forecast(&p, &t).unwrap() - 0.25).abs() < 1e-15);
        assert!(loss_forecast(&p[..3], &t).is_err());
    }

    #[test]
    fn fdi_examples() {
        let labels = [1u8, 0, 1, 0];
        let logits: Vec<f64> = labels.iter().map(|&y| if y == 1 { 50.0 } else { -50.0 }).collect();
        assert!(loss_fdi(&logits, &labels).unwrap() < 1e-9);
        assert!((loss_fdi(&[0.0; 4], &labels).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn fdi_matches_naive_formula() {
        let logits = [0.3, -2.0, 4.5, -0.7, 1.1];
        let labels = [1u8, 0, 0, 1, 1];
        let naive: f64 = logits
            .iter()
            .zip(&labels)
            .map(|(&x, &y)| {
                let p = 1.0 / (1.0 + (-x as f64).exp());
                -(y as f64 * p.ln() + (1.0 - y as f64) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / 5.0;
        assert!((loss_fdi(&logits, &labels).unwrap() - naive).abs() < 1e-10);
    }
}
