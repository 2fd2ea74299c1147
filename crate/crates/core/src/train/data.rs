//! Turning scenario sets into normalized model windows and targets.

use crate::linalg::{ComplexMatrix, C64};
use crate::model::{GraphContext, ModelError};
use crate::scenario::features::{feature_window, DEFAULT_WINDOW};
use crate::scenario::ScenarioSet;
use serde::{Deserialize, Serialize};

/// Affine map applied to every phasor fed to or produced by the model:
/// `x' = (x − offset) / scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub offset: C64,
    pub scale: f64,
}

impl Default for FeatureNorm {
    fn default() -> Self {
        Self {
            offset: C64::new(0.0, 0.0),
            scale: 1.0,
        }
    }
}

impl FeatureNorm {
    /// Mean and RMS deviation of all state estimates.
    pub fn fit(sets: &[&ScenarioSet]) -> Self {
        let mut sum = C64::new(0.0, 0.0);
        let mut count = 0usize;
        for s in sets {
            for row in &s.estimates {
                for v in row {
                    sum += v;
                    count += 1;
                }
            }
        }
        if count == 0 {
            return Self::default();
        }
        let offset = sum / count as f64;
        let mut ss = 0.0;
        for s in sets {
            for row in &s.estimates {
                for v in row {
                    ss += (v - offset).norm_sqr();
                }
            }
        }
        let scale = (ss / count as f64).sqrt().max(1e-6);
        Self { offset, scale }
    }

    pub fn apply(&self, x: C64) -> C64 {
        (x - self.offset) / self.scale
    }

    pub fn invert(&self, y: C64) -> C64 {
        y * self.scale + self.offset
    }
}

/// One system ready for the model: normalized feature matrices per hour.
#[derive(Clone, Debug)]
pub struct PreparedSystem<'a> {
    pub set: &'a ScenarioSet,
    pub ctx: GraphContext,
    norm: FeatureNorm,
    /// `frames[t]` is the normalized feature matrix ending at hour `t`
    /// (`None` before a full history exists).
    frames: Vec<Option<ComplexMatrix>>,
}

impl<'a> PreparedSystem<'a> {
    pub fn new(set: &'a ScenarioSet, norm: FeatureNorm, normalize_gso: bool) -> Result<Self, ModelError> {
        let ctx = GraphContext::new(&set.graph, normalize_gso)?;
        let frames = (0..set.t_total)
            .map(|t| {
                feature_window(&set.estimates, t, DEFAULT_WINDOW).ok().map(|mut m| {
                    for v in m.as_mut_slice() {
                        *v = norm.apply(*v);
                    }
                    m
                })
            })
            .collect();
        Ok(Self { set, ctx, norm, frames })
    }

    pub fn n(&self) -> usize {
        self.set.n()
    }

    pub fn norm(&self) -> FeatureNorm {
        self.norm
    }

    /// `window[τ] = X_{t−τ}`, zero where the history does not reach. With
    /// `attack_omega`, the attack recorded at hour `t` is added to the newest
    /// column of `X_t` at that level.
    pub fn window(&self, t: usize, len: usize, attack_omega: Option<f64>) -> Vec<ComplexMatrix> {
        let n = self.n();
        let mut w: Vec<ComplexMatrix> = (0..len)
            .map(|tau| {
                t.checked_sub(tau)
                    .and_then(|h| self.frames.get(h).cloned().flatten())
                    .unwrap_or_else(|| ComplexMatrix::zeros(n, DEFAULT_WINDOW))
            })
            .collect();
        if let (Some(omega), Some(rec)) = (attack_omega, self.set.attack_at(t)) {
            let col = DEFAULT_WINDOW - 1;
            for (i, s) in rec.estimate_shift.iter().enumerate() {
                w[0][(i, col)] += s * (omega / self.norm.scale);
            }
        }
        w
    }

    /// Normalized true states at `t + h` for `h = 0 .. horizons`.
    pub fn forecast_target(&self, t: usize, horizons: usize) -> Vec<Vec<C64>> {
        (0..horizons)
            .map(|h| self.set.true_states[t + h].iter().map(|v| self.norm.apply(*v)).collect())
            .collect()
    }

    /// Bus labels of the attack at hour `t` (all zero without one).
    pub fn labels(&self, t: usize) -> Vec<u8> {
        self.set
            .attack_at(t)
            .map(|r| r.attack.labels.clone())
            .unwrap_or_else(|| vec![0; self.n()])
    }

    /// The attack level recorded at hour `t`.
    pub fn recorded_omega(&self, t: usize) -> Option<f64> {
        self.set.attack_at(t).map(|r| r.attack.omega)
    }
}

/// Window end hours whose targets `t .. t + horizons` lie before hour
/// `boundary` (training) or at and after it (testing).
pub fn train_hours(t_total: usize, horizons: usize, boundary: usize) -> Vec<usize> {
    let first = DEFAULT_WINDOW - 1;
    let end = boundary.min(t_total);
    (first..end).filter(|t| t + horizons <= end).collect()
}

pub fn test_hours(t_total: usize, horizons: usize, boundary: usize) -> Vec<usize> {
    let first = (DEFAULT_WINDOW - 1).max(boundary);
    (first..t_total).filter(|t| t + horizons <= t_total).collect()
}

/// First hour of the test period.
pub fn split_boundary(t_total: usize, train_fraction: f64) -> usize {
    ((t_total as f64) * train_fraction).floor() as usize
}
