//! Fixed-size fully connected baseline trained on one topology.
//!
//! Inputs are the newest feature matrix `X_t` flattened by bus slot (bus
//! `k` of the graph order fills slot `k`); systems with fewer buses are
//! zero-padded, larger ones truncated. Output slot `k` predicts bus `k`.
//! Buses beyond the trained slot count receive the mean prediction over the
//! available slots.

use super::data::{self, FeatureNorm, PreparedSystem};
use super::eval::Predictor;
use super::optim::{Optimizer, OptimizerKind};
use super::{loss_fdi_grad, loss_forecast_grad};
use crate::linalg::C64;
use crate::model::dense::{axpy, RMat};
use crate::model::{ModelError, Task};
use crate::rng;
use crate::scenario::features::DEFAULT_WINDOW;
use crate::scenario::ScenarioSet;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DenseConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub train_fraction: f64,
}

impl Default for DenseConfig {
    fn default() -> Self {
        Self {
            hidden: vec![512, 512, 512],
            epochs: 40,
            batch: 16,
            learning_rate: 1e-3,
            seed: 0,
            train_fraction: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out × in`.
    pub w: RMat,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseBaseline {
    pub slots: usize,
    pub task: Task,
    pub horizons: usize,
    pub layers: Vec<DenseLayer>,
    pub norm: FeatureNorm,
}

impl DenseBaseline {
    fn n_out(&self) -> usize {
        match self.task {
            Task::Forecast => 2 * self.horizons,
            Task::Fdi => 1,
        }
    }

    fn input(&self, sys: &PreparedSystem<'_>, t: usize, omega: Option<f64>) -> Vec<f64> {
        let x = sys.window(t, 1, omega).swap_remove(0);
        let mut v = vec![0.0; 2 * self.slots * DEFAULT_WINDOW];
        for k in 0..self.slots.min(x.rows()) {
            for (c, z) in x.row(k).iter().enumerate() {
                v[2 * (k * DEFAULT_WINDOW + c)] = z.re;
                v[2 * (k * DEFAULT_WINDOW + c) + 1] = z.im;
            }
        }
        v
    }

    /// Activations of every layer (`acts[0]` is the input).
    fn forward(&self, x: Vec<f64>) -> Vec<Vec<f64>> {
        let mut acts = vec![x];
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = l.w.matvec(acts.last().unwrap());
            axpy(&mut z, 1.0, &l.b);
            if i + 1 < self.layers.len() {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            acts.push(z);
        }
        acts
    }

    fn backward(&self, acts: &[Vec<f64>], g_out: Vec<f64>, grads: &mut [DenseLayer]) {
        let mut g = g_out;
        for i in (0..self.layers.len()).rev() {
            grads[i].w.add_outer(&g, &acts[i]);
            axpy(&mut grads[i].b, 1.0, &g);
            if i > 0 {
                let mut gi = self.layers[i].w.t_matvec(&g);
                for (v, a) in gi.iter_mut().zip(&acts[i]) {
                    if *a <= 0.0 {
                        *v = 0.0;
                    }
                }
                g = gi;
            }
        }
    }

    /// Maps the slot outputs to `n` bus rows.
    fn to_rows(&self, out: &[f64], n: usize) -> RMat {
        let k = self.n_out();
        let used = self.slots.min(n);
        let mut mean = vec![0.0; k];
        for s in 0..used {
            for c in 0..k {
                mean[c] += out[s * k + c] / used as f64;
            }
        }
        RMat::from_fn(n, k, |i, c| if i < self.slots { out[i * k + c] } else { mean[c] })
    }

    fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.data.iter().chain(&l.b).copied())
            .collect()
    }

    fn set_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for v in l.w.data.iter_mut().chain(l.b.iter_mut()) {
                *v = it.next().unwrap();
            }
        }
    }

    /// Loss of one window and the gradient at the slot outputs. Only slots
    /// backed by a bus contribute.
    fn sample_loss(&self, sys: &PreparedSystem<'_>, t: usize, out: &[f64]) -> (f64, Vec<f64>) {
        let k = self.n_out();
        let n = self.slots.min(sys.n());
        let mut g = vec![0.0; out.len()];
        match self.task {
            Task::Forecast => {
                let targets = sys.forecast_target(t, self.horizons);
                let hn = self.horizons as f64;
                let mut total = 0.0;
                for (h, target) in targets.iter().enumerate() {
                    let pred: Vec<C64> = (0..n).map(|i| C64::new(out[i * k + 2 * h], out[i * k + 2 * h + 1])).collect();
                    let (l, gp) = loss_forecast_grad(&pred, &target[..n]).expect("shapes agree");
                    total += l / hn;
                    for (i, v) in gp.iter().enumerate() {
                        g[i * k + 2 * h] = v.re / hn;
                        g[i * k + 2 * h + 1] = v.im / hn;
                    }
                }
                (total, g)
            }
            Task::Fdi => {
                let logits: Vec<f64> = (0..n).map(|i| out[i * k]).collect();
                let labels = sys.labels(t);
                let (l, gl) = loss_fdi_grad(&logits, &labels[..n], 1.0).expect("shapes agree");
                for (i, v) in gl.into_iter().enumerate() {
                    g[i * k] = v;
                }
                (l, g)
            }
        }
    }

    /// Human-readable description of the slot mapping for a system size.
    pub fn padding_note(&self, n: usize) -> String {
        use std::cmp::Ordering::*;
        match n.cmp(&self.slots) {
            Equal => format!("{n} buses map one-to-one onto {} slots", self.slots),
            Less => format!(
                "{n} buses fill slots 0..{n}; input slots {n}..{} are zero and their outputs are dropped",
                self.slots
            ),
            Greater => format!(
                "{n} buses: buses 0..{} use their slots, inputs of buses {}..{n} are dropped and their outputs are the slot mean",
                self.slots, self.slots
            ),
        }
    }
}

impl Predictor for DenseBaseline {
    fn name(&self) -> &str {
        "dense"
    }

    fn task(&self) -> Task {
        self.task
    }

    fn horizons(&self) -> usize {
        self.horizons
    }

    fn predict(&self, sys: &PreparedSystem<'_>, hours: &[usize], omega: Option<f64>) -> Result<Vec<RMat>, ModelError> {
        Ok(hours
            .iter()
            .map(|&t| {
                let acts = self.forward(self.input(sys, t, omega));
                self.to_rows(acts.last().unwrap(), sys.n())
            })
            .collect())
    }
}

/// Trains the baseline on the training period of `base` alone.
pub fn train_dense(
    base: &ScenarioSet,
    task: Task,
    horizons: usize,
    norm: FeatureNorm,
    cfg: &DenseConfig,
) -> Result<DenseBaseline, ModelError> {
    let slots = base.n();
    let n_out = match task {
        Task::Forecast => 2 * horizons,
        Task::Fdi => 1,
    };
    let mut dims = vec![2 * slots * DEFAULT_WINDOW];
    dims.extend(&cfg.hidden);
    dims.push(slots * n_out);
    let mut r = rng::stream(cfg.seed, &[rng::tag::INIT, 1]);
    let layers = dims
        .windows(2)
        .map(|d| {
            let dist = Normal::new(0.0, (2.0 / d[0] as f64).sqrt()).unwrap();
            DenseLayer {
                w: RMat::from_fn(d[1], d[0], |_, _| dist.sample(&mut r)),
                b: vec![0.0; d[1]],
            }
        })
        .collect();
    let mut model = DenseBaseline {
        slots,
        task,
        horizons,
        layers,
        norm,
    };
    let sys = PreparedSystem::new(base, norm, true)?;
    let hn = if task == Task::Forecast { horizons } else { 1 };
    let b = data::split_boundary(base.t_total, cfg.train_fraction);
    let hours = data::train_hours(base.t_total, hn, b);
    if hours.is_empty() {
        return Ok(model);
    }
    let inputs: Vec<Vec<f64>> = hours
        .iter()
        .map(|&t| model.input(&sys, t, if task == Task::Fdi { sys.recorded_omega(t) } else { None }))
        .collect();
    let mut index: Vec<usize> = (0..hours.len()).collect();
    let mut opt = Optimizer::new(OptimizerKind::default(), cfg.learning_rate, model.flat().len());
    let batch = cfg.batch.max(1);
    for epoch in 0..cfg.epochs {
        let mut er = rng::stream(cfg.seed, &[rng::tag::TRAIN, 1, epoch as u64]);
        index.shuffle(&mut er);
        for chunk in index.chunks(batch) {
            let mut grads: Vec<DenseLayer> = model
                .layers
                .iter()
                .map(|l| DenseLayer {
                    w: RMat::zeros(l.w.rows, l.w.cols),
                    b: vec![0.0; l.b.len()],
                })
                .collect();
            for &i in chunk {
                let acts = model.forward(inputs[i].clone());
                let (_, mut g) = model.sample_loss(&sys, hours[i], acts.last().unwrap());
                for v in &mut g {
                    *v /= chunk.len() as f64;
                }
                model.backward(&acts, g, &mut grads);
            }
            let gflat: Vec<f64> = grads
                .iter()
                .flat_map(|l| l.w.data.iter().chain(&l.b).copied())
                .collect();
            let mut flat = model.flat();
            opt.update(&mut flat, &gflat);
            model.set_flat(&flat);
        }
    }
    Ok(model)
}
