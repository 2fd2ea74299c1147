//! The universal graph convolutional network: complex spatio-temporal
//! convolution layers, adaptive pooling and a parallel output head, with
//! reverse-mode gradients for every parameter.
//!
//! Gradients of complex tensors use the convention
//! `∂ℓ/∂Re z + j ∂ℓ/∂Im z`, so a gradient step on a complex entry is a step on
//! its real and imaginary parts.

pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod head;
pub mod params;
pub mod pool;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use conv::{conv_forward, ConvError};
pub use dense::RMat;
pub use params::{Activation, ConfigError, LayerConfig, Pooling, ScoreKind, Task, TensorInfo, UgcnParams};
pub use pool::{cluster_sizes, pool_custom, pool_learnable};

use crate::grid::{build_admittance, build_gso_with, GridGraph};
use crate::linalg::{ComplexMatrix, C64};
use conv::ConvTape;
use head::HeadTape;
use pool::{CustomPoolTape, LearnablePoolTape};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{n} nodes cannot be pooled into {n_pool} clusters")]
    TooFewNodes { n: usize, n_pool: usize },
    #[error("backward called without a recorded forward pass")]
    NoForwardRecorded,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("graph: {0}")]
    Graph(String),
}

impl From<ConvError> for ModelError {
    fn from(e: ConvError) -> Self {
        match e {
            ConvError::DimensionMismatch(m) => ModelError::DimensionMismatch(m),
        }
    }
}

/// Per-system quantities the model needs besides the features.
#[derive(Clone, Debug)]
pub struct GraphContext {
    pub gso: ComplexMatrix,
    gso_adj: ComplexMatrix,
    /// Bus indices in BFS order from the root.
    pub order: Vec<usize>,
}

impl GraphContext {
    pub fn new(g: &GridGraph, normalize: bool) -> Result<Self, ModelError> {
        let y = build_admittance(g).map_err(|e| ModelError::Graph(e.to_string()))?;
        let gso = build_gso_with(&y, normalize).map_err(|e| ModelError::Graph(e.to_string()))?;
        Self::from_parts(gso.matrix, g.bfs_order())
    }

    pub fn from_parts(gso: ComplexMatrix, order: Vec<usize>) -> Result<Self, ModelError> {
        if !gso.is_square() || order.len() != gso.rows() {
            return Err(ModelError::DimensionMismatch(format!(
                "shift operator {}x{} with {} ordered nodes",
                gso.rows(),
                gso.cols(),
                order.len()
            )));
        }
        let gso_adj = gso.adjoint();
        Ok(Self { gso, gso_adj, order })
    }

    pub fn n(&self) -> usize {
        self.gso.rows()
    }
}

/// Raw head output, `N_q × n_outputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub values: RMat,
}

impl Prediction {
    /// Forecast phasors for horizon index `h` (output columns `2h`, `2h + 1`).
    pub fn phasors(&self, h: usize) -> Vec<C64> {
        (0..self.values.rows)
            .map(|i| C64::new(self.values.at(i, 2 * h), self.values.at(i, 2 * h + 1)))
            .collect()
    }

    /// First output column (FDI logits).
    pub fn logits(&self) -> Vec<f64> {
        (0..self.values.rows).map(|i| self.values.at(i, 0)).collect()
    }
}

#[derive(Clone, Debug)]
enum PoolTape {
    Custom(CustomPoolTape),
    Learnable(LearnablePoolTape),
}

#[derive(Clone, Debug)]
struct TrunkTape {
    conv: Vec<ConvTape>,
    last: ComplexMatrix,
    pool: PoolTape,
    pooled_shape: (usize, usize),
}

fn check_window(cfg: &LayerConfig, ctx: &GraphContext, window: &[ComplexMatrix]) -> Result<(), ModelError> {
    if window.len() != cfg.window_len() {
        return Err(ModelError::DimensionMismatch(format!(
            "window has {} feature matrices, model reads {}",
            window.len(),
            cfg.window_len()
        )));
    }
    let (n, f) = (ctx.n(), cfg.input_width());
    if let Some(x) = window.iter().find(|x| x.rows() != n || x.cols() != f) {
        return Err(ModelError::DimensionMismatch(format!(
            "feature matrix {}x{}, expected {n}x{f}",
            x.rows(),
            x.cols()
        )));
    }
    Ok(())
}

/// Convolutions and pooling: returns the pooled latent.
fn trunk_forward(
    p: &UgcnParams,
    cfg: &LayerConfig,
    ctx: &GraphContext,
    window: &[ComplexMatrix],
) -> Result<(ComplexMatrix, TrunkTape), ModelError> {
    check_window(cfg, ctx, window)?;
    let layers = cfg.layers();
    let mut tapes = Vec::with_capacity(layers);
    let mut cur: Vec<ComplexMatrix> = window.to_vec();
    for (l, taps) in p.conv.iter().enumerate() {
        let n_out = (layers - l - 1) * cfg.k_t + 1;
        let (out, tape) = conv::conv_layer_forward(&ctx.gso, &cur, taps, cfg.k, cfg.k_t, n_out);
        tapes.push(tape);
        cur = out;
    }
    let last = cur.swap_remove(0);
    let (pooled, pool) = match cfg.pooling {
        Pooling::Custom => {
            let (x, t) = pool::pool_custom_with_tape(&last, cfg.n_pool, &ctx.order)?;
            (x, PoolTape::Custom(t))
        }
        Pooling::Learnable => {
            let w = p
                .w_a
                .as_ref()
                .ok_or_else(|| ModelError::DimensionMismatch("learnable pooling without W_A".into()))?;
            let (x, t) = pool::pool_learnable_with_tape(&last, w, cfg.score)?;
            (x, PoolTape::Learnable(t))
        }
    };
    let pooled_shape = (pooled.rows(), pooled.cols());
    Ok((
        pooled,
        TrunkTape {
            conv: tapes,
            last,
            pool,
            pooled_shape,
        },
    ))
}

fn trunk_backward(
    p: &UgcnParams,
    cfg: &LayerConfig,
    ctx: &GraphContext,
    tape: &TrunkTape,
    g_x_in: &[f64],
    grads: &mut UgcnParams,
) {
    let (r, c) = tape.pooled_shape;
    let g_pool = head::split_real_backward(g_x_in, r, c);
    let g_last = match &tape.pool {
        PoolTape::Custom(t) => pool::pool_custom_backward(t, &g_pool, ctx.n()),
        PoolTape::Learnable(t) => {
            let w = p.w_a.as_ref().unwrap();
            let g_w = grads.w_a.as_mut().unwrap();
            pool::pool_learnable_backward(t, &tape.last, w, cfg.score, &g_pool, g_w)
        }
    };
    let mut g_out = vec![g_last];
    for l in (0..cfg.layers()).rev() {
        let want = l > 0;
        let g_in = conv::conv_layer_backward(
            &ctx.gso_adj,
            &tape.conv[l],
            &p.conv[l],
            &g_out,
            cfg.k,
            cfg.k_t,
            &mut grads.conv[l],
            want,
        );
        match g_in {
            Some(g) => g_out = g,
            None => break,
        }
    }
}

fn check_params(p: &UgcnParams, cfg: &LayerConfig) -> Result<(), ModelError> {
    cfg.validate()?;
    if p.conv.len() != cfg.layers() || p.w_enc.cols != cfg.head_input() || p.w_out.cols != cfg.n_outputs() {
        return Err(ModelError::DimensionMismatch("parameters do not match the layer config".into()));
    }
    Ok(())
}

/// Full forward pass. `window[τ]` is the feature matrix `X_{t-τ}` for
/// `τ = 0 .. cfg.window_len()`; `n_out` is the number of output rows.
pub fn model_forward(
    ctx: &GraphContext,
    window: &[ComplexMatrix],
    params: &UgcnParams,
    cfg: &LayerConfig,
    n_out: usize,
) -> Result<Prediction, ModelError> {
    check_params(params, cfg)?;
    let (pooled, _) = trunk_forward(params, cfg, ctx, window)?;
    let (values, _) = head::head_forward_tape(params, head::split_real(&pooled), n_out);
    Ok(Prediction { values })
}

struct Recorded<'a> {
    ctx: &'a GraphContext,
    trunk: TrunkTape,
    head: HeadTape,
}

/// Records one forward pass so [`Session::backward`] can differentiate it.
pub struct Session<'a> {
    params: &'a UgcnParams,
    cfg: &'a LayerConfig,
    recorded: Option<Recorded<'a>>,
}

impl<'a> Session<'a> {
    pub fn new(params: &'a UgcnParams, cfg: &'a LayerConfig) -> Self {
        Self {
            params,
            cfg,
            recorded: None,
        }
    }

    pub fn forward(
        &mut self,
        ctx: &'a GraphContext,
        window: &[ComplexMatrix],
        n_out: usize,
    ) -> Result<Prediction, ModelError> {
        check_params(self.params, self.cfg)?;
        let (pooled, trunk) = trunk_forward(self.params, self.cfg, ctx, window)?;
        let (values, head) = head::head_forward_tape(self.params, head::split_real(&pooled), n_out);
        self.recorded = Some(Recorded { ctx, trunk, head });
        Ok(Prediction { values })
    }

    /// Gradients of a scalar loss given `∂ℓ/∂y` for the last forward pass.
    pub fn backward(&mut self, g_y: &RMat) -> Result<UgcnParams, ModelError> {
        let rec = self.recorded.take().ok_or(ModelError::NoForwardRecorded)?;
        let mut grads = self.params.zeros_like();
        let g_x = head::head_backward(self.params, &rec.head, g_y, &mut grads);
        trunk_backward(self.params, self.cfg, rec.ctx, &rec.trunk, &g_x, &mut grads);
        Ok(grads)
    }
}

/// Forward and backward over many windows of one system, sharing the
/// position embeddings. `loss(i, y)` returns the loss of window `i` and its
/// gradient with respect to `y`. Gradients are added into `grads` in window
/// order; the summed loss is returned.
pub fn system_gradient(
    params: &UgcnParams,
    cfg: &LayerConfig,
    ctx: &GraphContext,
    windows: &[Vec<ComplexMatrix>],
    mut loss: impl FnMut(usize, &RMat) -> (f64, RMat),
    grads: &mut UgcnParams,
) -> Result<f64, ModelError> {
    check_params(params, cfg)?;
    let n = ctx.n();
    let cache = head::position_cache(params, n);
    let mut g_sys = RMat::zeros(n, cfg.d);
    let mut trunks = Vec::with_capacity(windows.len());
    let mut x = RMat::zeros(windows.len(), params.w_enc.cols);
    for (i, w) in windows.iter().enumerate() {
        let (pooled, trunk) = trunk_forward(params, cfg, ctx, w)?;
        x.row_mut(i).copy_from_slice(&head::split_real(&pooled));
        trunks.push(trunk);
    }
    let h_pre = head::encoder_pre_batch(params, &x);
    let mut g_pre = RMat::zeros(windows.len(), cfg.d);
    let mut total = 0.0;
    for i in 0..windows.len() {
        let h: Vec<f64> = h_pre.row(i).iter().map(|v| v.max(0.0)).collect();
        let (y, tail) = head::tail_forward(params, &cache, &h);
        let (l, g_y) = loss(i, &y);
        total += l;
        let g_h = head::tail_backward(params, &h, &tail, &g_y, grads, &mut g_sys);
        for ((g, gh), z) in g_pre.row_mut(i).iter_mut().zip(&g_h).zip(h_pre.row(i)) {
            *g = if *z > 0.0 { *gh } else { 0.0 };
        }
    }
    let g_x = head::encoder_backward_batch(params, &x, &g_pre, grads);
    for (i, trunk) in trunks.iter().enumerate() {
        trunk_backward(params, cfg, ctx, trunk, g_x.row(i), grads);
    }
    head::position_backward(params, &cache, &g_sys, grads);
    Ok(total)
}

/// Batched inference over many windows of one system.
pub fn system_forward(
    params: &UgcnParams,
    cfg: &LayerConfig,
    ctx: &GraphContext,
    windows: &[Vec<ComplexMatrix>],
) -> Result<Vec<Prediction>, ModelError> {
    check_params(params, cfg)?;
    let cache = head::position_cache(params, ctx.n());
    let mut x = RMat::zeros(windows.len(), params.w_enc.cols);
    for (i, w) in windows.iter().enumerate() {
        let (pooled, _) = trunk_forward(params, cfg, ctx, w)?;
        x.row_mut(i).copy_from_slice(&head::split_real(&pooled));
    }
    let h_pre = head::encoder_pre_batch(params, &x);
    Ok((0..windows.len())
        .map(|i| {
            let h: Vec<f64> = h_pre.row(i).iter().map(|v| v.max(0.0)).collect();
            let (values, _) = head::tail_forward(params, &cache, &h);
            Prediction { values }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tests::chain;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn small_cfg(pooling: Pooling) -> LayerConfig {
        LayerConfig {
            k: 2,
            k_t: 1,
            widths: vec![3, 4, 3],
            n_pool: 2,
            d: 5,
            pooling,
            ..LayerConfig::forecast()
        }
    }

    fn random_window(cfg: &LayerConfig, n: usize, seed: u64) -> Vec<ComplexMatrix> {
        let mut r = rng::stream(seed, &[99]);
        (0..cfg.window_len())
            .map(|_| {
                ComplexMatrix::from_fn(n, cfg.input_width(), |_, _| {
                    C64::new(StandardNormal.sample(&mut r), StandardNormal.sample(&mut r))
                })
            })
            .collect()
    }

    #[test]
    fn backward_requires_forward() {
        let cfg = small_cfg(Pooling::Custom);
        let p = UgcnParams::init(&cfg, 0);
        let mut s = Session::new(&p, &cfg);
        assert_eq!(s.backward(&RMat::zeros(1, 2)).unwrap_err(), ModelError::NoForwardRecorded);
    }

    #[test]
    fn batched_matches_per_sample_sum() {
        for pooling in [Pooling::Custom, Pooling::Learnable] {
            let cfg = small_cfg(pooling);
            let p = UgcnParams::init(&cfg, 3);
            let g = chain(6, C64::new(0.1, 0.2));
            let ctx = GraphContext::new(&g, true).unwrap();
            let windows: Vec<_> = (0..3).map(|i| random_window(&cfg, 6, i)).collect();
            let seed_grad = |y: &RMat| {
                let l = 0.5 * y.data.iter().map(|v| v * v).sum::<f64>();
                (l, y.clone())
            };
            let mut batched = p.zeros_like();
            let lb = system_gradient(&p, &cfg, &ctx, &windows, |_, y| seed_grad(y), &mut batched).unwrap();
            let mut summed = vec![0.0; p.n_real()];
            let mut ls = 0.0;
            for w in &windows {
                let mut s = Session::new(&p, &cfg);
                let y = s.forward(&ctx, w, 6).unwrap();
                let (l, gy) = seed_grad(&y.values);
                ls += l;
                for (a, b) in summed.iter_mut().zip(s.backward(&gy).unwrap().to_flat()) {
                    *a += b;
                }
            }
            assert!((lb - ls).abs() < 1e-10 * ls.max(1.0));
            for (a, b) in batched.to_flat().iter().zip(&summed) {
                assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }
}
