//! Grid-graph-sampling training, evaluation and the dense baseline.
//!
//! Every step samples `batch_systems` systems without replacement and
//! `windows_per_system` training windows from each. The step loss is the
//! mean over systems of the mean window loss, and all parameters are
//! updated from its gradient.

pub mod baseline;
pub mod data;
pub mod eval;
pub mod loss;
pub mod optim;

pub use baseline::{train_dense, DenseBaseline, DenseConfig};
pub use data::{FeatureNorm, PreparedSystem};
pub use eval::{eval_fdi, eval_forecast, FdiMetric, HorizonMetric, MetricsReport, SystemMetrics};
pub use loss::{loss_fdi, loss_fdi_grad, loss_forecast, loss_forecast_grad, LossError};
pub use optim::{Optimizer, OptimizerKind};

use crate::linalg::C64;
use crate::model::{system_forward, system_gradient, LayerConfig, ModelError, RMat, Task, UgcnParams};
use crate::par::par_map;
use crate::rng;
use crate::scenario::ScenarioSet;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    /// Systems per step, `|ℬ|`.
    pub batch_systems: usize,
    pub windows_per_system: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    /// Share of each system's training windows held out for validation.
    pub val_fraction: f64,
    /// Share of the time axis used for training targets.
    pub train_fraction: f64,
    /// Weight of the positive class in the FDI loss.
    pub pos_weight: f64,
    /// Cap on validation windows per system.
    pub val_windows: usize,
    pub normalize_gso: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            steps_per_epoch: 10,
            batch_systems: 4,
            windows_per_system: 8,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            seed: 0,
            patience: 10,
            val_fraction: 0.1,
            train_fraction: 0.8,
            pos_weight: 1.0,
            val_windows: 16,
            normalize_gso: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.epochs < 1 || self.steps_per_epoch < 1 {
            return bad("epochs and steps_per_epoch must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_systems < 1 || self.windows_per_system < 1 {
            return bad("batch_systems and windows_per_system must be at least 1");
        }
        if !(0.0..1.0).contains(&self.val_fraction) || !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad("val_fraction must lie in [0, 1) and train_fraction in (0, 1]");
        }
        if !(self.pos_weight > 0.0) {
            return bad("pos_weight must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no training systems or windows")]
    NoData,
    #[error("loss diverged at epoch {epoch}, step {step}")]
    DivergedLoss {
        epoch: usize,
        step: usize,
        /// State after the last finite step.
        last_good: Box<TrainState>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_loss: f64,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Completed epochs.
    pub epoch: usize,
    pub params: UgcnParams,
    pub optimizer: Optimizer,
    pub history: Vec<EpochRecord>,
    pub norm: FeatureNorm,
    pub best_val: f64,
    pub best_params: UgcnParams,
    pub bad_epochs: usize,
    pub stopped: bool,
}

impl TrainState {
    pub fn history_csv(&self) -> String {
        history_csv(&self.history)
    }
}

pub fn history_csv(h: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,loss,val_loss\n");
    for r in h {
        s.push_str(&format!("{},{},{}\n", r.epoch, r.loss, r.val_loss));
    }
    s
}

fn horizons_for(layer: &LayerConfig) -> usize {
    match layer.task {
        Task::Forecast => layer.horizons,
        Task::Fdi => 1,
    }
}

/// Loss of one window and its gradient with respect to the raw head output.
fn window_loss(
    layer: &LayerConfig,
    sys: &PreparedSystem<'_>,
    t: usize,
    y: &RMat,
    pos_weight: f64,
) -> (f64, RMat) {
    let mut g = RMat::zeros(y.rows, y.cols);
    match layer.task {
        Task::Forecast => {
            let targets = sys.forecast_target(t, layer.horizons);
            let hn = layer.horizons as f64;
            let mut total = 0.0;
            for (h, target) in targets.iter().enumerate() {
                let pred: Vec<C64> = (0..y.rows).map(|i| C64::new(y.at(i, 2 * h), y.at(i, 2 * h + 1))).collect();
                let (l, gp) = loss_forecast_grad(&pred, target).expect("shapes agree");
                total += l / hn;
                for (i, gv) in gp.iter().enumerate() {
                    g.data[i * y.cols + 2 * h] = gv.re / hn;
                    g.data[i * y.cols + 2 * h + 1] = gv.im / hn;
                }
            }
            (total, g)
        }
        Task::Fdi => {
            let logits: Vec<f64> = (0..y.rows).map(|i| y.at(i, 0)).collect();
            let (l, gl) = loss_fdi_grad(&logits, &sys.labels(t), pos_weight).expect("shapes agree");
            for (i, v) in gl.into_iter().enumerate() {
                g.data[i * y.cols] = v;
            }
            (l, g)
        }
    }
}

fn attack_level(layer: &LayerConfig, sys: &PreparedSystem<'_>, t: usize) -> Option<f64> {
    match layer.task {
        Task::Fdi => sys.recorded_omega(t),
        Task::Forecast => None,
    }
}

/// Training and validation windows per system.
fn split_windows(systems: &[PreparedSystem<'_>], layer: &LayerConfig, cfg: &TrainConfig) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let hn = horizons_for(layer);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, s) in systems.iter().enumerate() {
        let b = data::split_boundary(s.set.t_total, cfg.train_fraction);
        let mut hours = data::train_hours(s.set.t_total, hn, b);
        let mut r = rng::stream(cfg.seed, &[rng::tag::SPLIT, i as u64]);
        hours.shuffle(&mut r);
        let n_val = ((hours.len() as f64) * cfg.val_fraction).ceil() as usize;
        let n_val = n_val.min(hours.len().saturating_sub(1));
        let mut v = hours.split_off(hours.len() - n_val);
        hours.sort_unstable();
        v.sort_unstable();
        v.truncate(cfg.val_windows.max(1));
        train.push(hours);
        val.push(v);
    }
    (train, val)
}

fn mean_loss(
    params: &UgcnParams,
    layer: &LayerConfig,
    systems: &[PreparedSystem<'_>],
    windows: &[Vec<usize>],
    cfg: &TrainConfig,
    jobs: usize,
) -> Result<f64, ModelError> {
    let per: Vec<Result<Option<f64>, ModelError>> = par_map(systems, jobs, |i, s| {
        if windows[i].is_empty() {
            return Ok(None);
        }
        let w: Vec<_> = windows[i]
            .iter()
            .map(|&t| s.window(t, layer.window_len(), attack_level(layer, s, t)))
            .collect();
        let preds = system_forward(params, layer, &s.ctx, &w)?;
        let l: f64 = windows[i]
            .iter()
            .zip(&preds)
            .map(|(&t, p)| window_loss(layer, s, t, &p.values, cfg.pos_weight).0)
            .sum();
        Ok(Some(l / windows[i].len() as f64))
    });
    let mut sum = 0.0;
    let mut count = 0;
    for r in per {
        if let Some(l) = r? {
            sum += l;
            count += 1;
        }
    }
    Ok(if count == 0 { f64::NAN } else { sum / count as f64 })
}

/// Sets the output bias to the training-target mean (forecast) or the logit
/// of the positive rate (FDI).
pub fn init_output_bias(params: &mut UgcnParams, layer: &LayerConfig, systems: &[PreparedSystem<'_>], hours: &[Vec<usize>]) {
    match layer.task {
        Task::Forecast => {
            let mut sums = vec![0.0; params.b_out.len()];
            let mut count = 0usize;
            for (s, hs) in systems.iter().zip(hours) {
                for &t in hs {
                    for (h, target) in s.forecast_target(t, layer.horizons).iter().enumerate() {
                        for v in target {
                            sums[2 * h] += v.re;
                            sums[2 * h + 1] += v.im;
                        }
                    }
                    count += s.n();
                }
            }
            if count > 0 {
                for (b, s) in params.b_out.iter_mut().zip(sums) {
                    *b = s / count as f64;
                }
            }
        }
        Task::Fdi => {
            let (mut pos, mut total) = (0usize, 0usize);
            for (s, hs) in systems.iter().zip(hours) {
                for &t in hs {
                    let l = s.labels(t);
                    pos += l.iter().filter(|&&v| v != 0).count();
                    total += l.len();
                }
            }
            if total > 0 {
                let p = (pos as f64 / total as f64).clamp(1e-4, 1.0 - 1e-4);
                params.b_out[0] = (p / (1.0 - p)).ln();
            }
        }
    }
}

/// Fresh training state: output bias fitted to the data, zeroed optimizer.
pub fn initial_state(
    mut params: UgcnParams,
    layer: &LayerConfig,
    systems: &[ScenarioSet],
    cfg: &TrainConfig,
) -> Result<TrainState, TrainError> {
    cfg.validate()?;
    if systems.is_empty() {
        return Err(TrainError::NoData);
    }
    let refs: Vec<&ScenarioSet> = systems.iter().collect();
    let norm = FeatureNorm::fit(&refs);
    let prepared = prepare(systems, norm, cfg.normalize_gso)?;
    let (train_w, _) = split_windows(&prepared, layer, cfg);
    init_output_bias(&mut params, layer, &prepared, &train_w);
    let optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, params.n_real());
    Ok(TrainState {
        epoch: 0,
        best_params: params.clone(),
        params,
        optimizer,
        history: Vec::new(),
        norm,
        best_val: f64::INFINITY,
        bad_epochs: 0,
        stopped: false,
    })
}

pub fn prepare<'a>(systems: &'a [ScenarioSet], norm: FeatureNorm, normalize_gso: bool) -> Result<Vec<PreparedSystem<'a>>, ModelError> {
    systems.iter().map(|s| PreparedSystem::new(s, norm, normalize_gso)).collect()
}

/// Trains from scratch and returns the final state (holding the best
/// validation parameters in `best_params`).
pub fn train(
    params: UgcnParams,
    layer: &LayerConfig,
    systems: &[ScenarioSet],
    cfg: &TrainConfig,
) -> Result<TrainState, TrainError> {
    let state = initial_state(params, layer, systems, cfg)?;
    train_from(state, layer, systems, cfg, 1, |_| {})
}

/// Continues training from `state` until `cfg.epochs` epochs are complete or
/// early stopping triggers. `on_epoch` sees the state after each epoch.
pub fn train_from(
    mut state: TrainState,
    layer: &LayerConfig,
    systems: &[ScenarioSet],
    cfg: &TrainConfig,
    jobs: usize,
    mut on_epoch: impl FnMut(&TrainState),
) -> Result<TrainState, TrainError> {
    cfg.validate()?;
    if systems.is_empty() {
        return Err(TrainError::NoData);
    }
    let prepared = prepare(systems, state.norm, cfg.normalize_gso)?;
    let (train_w, val_w) = split_windows(&prepared, layer, cfg);
    let usable: Vec<usize> = (0..prepared.len()).filter(|&i| !train_w[i].is_empty()).collect();
    if usable.is_empty() {
        return Err(TrainError::NoData);
    }
    let b = cfg.batch_systems.min(usable.len());
    while state.epoch < cfg.epochs && !state.stopped {
        let epoch = state.epoch;
        let mut epoch_loss = 0.0;
        for step in 0..cfg.steps_per_epoch {
            let mut r = rng::stream(cfg.seed, &[rng::tag::TRAIN, epoch as u64, step as u64]);
            let mut batch: Vec<usize> = sample(&mut r, usable.len(), b).into_iter().map(|k| usable[k]).collect();
            batch.sort_unstable();
            let picks: Vec<(usize, Vec<usize>)> = batch
                .iter()
                .map(|&s| {
                    let hours = &train_w[s];
                    let k = cfg.windows_per_system.min(hours.len());
                    let mut ts: Vec<usize> = sample(&mut r, hours.len(), k).into_iter().map(|j| hours[j]).collect();
                    ts.sort_unstable();
                    (s, ts)
                })
                .collect();
            let params = &state.params;
            let results = par_map(&picks, jobs, |_, (s, ts)| -> Result<(f64, Vec<f64>), ModelError> {
                let sys = &prepared[*s];
                let windows: Vec<_> = ts
                    .iter()
                    .map(|&t| sys.window(t, layer.window_len(), attack_level(layer, sys, t)))
                    .collect();
                let mut grads = params.zeros_like();
                let scale = 1.0 / (ts.len() * b) as f64;
                let total = system_gradient(
                    params,
                    layer,
                    &sys.ctx,
                    &windows,
                    |i, y| {
                        let (l, mut g) = window_loss(layer, sys, ts[i], y, cfg.pos_weight);
                        for v in &mut g.data {
                            *v *= scale;
                        }
                        (l, g)
                    },
                    &mut grads,
                )?;
                Ok((total / ts.len() as f64, grads.to_flat()))
            });
            let mut loss = 0.0;
            let mut grad = vec![0.0; state.params.n_real()];
            for res in results {
                let (l, g) = res?;
                loss += l / b as f64;
                for (a, v) in grad.iter_mut().zip(g) {
                    *a += v;
                }
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::DivergedLoss {
                    epoch,
                    step,
                    last_good: Box::new(state),
                });
            }
            let mut flat = state.params.to_flat();
            state.optimizer.update(&mut flat, &grad);
            if flat.iter().any(|v| !v.is_finite()) {
                return Err(TrainError::DivergedLoss {
                    epoch,
                    step,
                    last_good: Box::new(state),
                });
            }
            state.params.set_flat(&flat);
            epoch_loss += loss / cfg.steps_per_epoch as f64;
        }
        let val = mean_loss(&state.params, layer, &prepared, &val_w, cfg, jobs)?;
        let val_loss = if val.is_nan() { epoch_loss } else { val };
        state.history.push(EpochRecord {
            epoch: epoch + 1,
            loss: epoch_loss,
            val_loss,
        });
        if val_loss < state.best_val {
            state.best_val = val_loss;
            state.best_params = state.params.clone();
            state.bad_epochs = 0;
        } else {
            state.bad_epochs += 1;
            if cfg.patience > 0 && state.bad_epochs >= cfg.patience {
                state.stopped = true;
            }
        }
        state.epoch += 1;
        on_epoch(&state);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_config() {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(TrainError::InvalidConfig(_))));
    }

    #[test]
    fn history_has_header() {
        let h = vec![EpochRecord {
            epoch: 1,
            loss: 0.5,
            val_loss: 0.25,
        }];
        assert_eq!(history_csv(&h), "epoch,loss,val_loss\n1,0.5,0.25\n");
    }
}
