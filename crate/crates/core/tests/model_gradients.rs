mod common;

use common::*;
use ugcn::linalg::ComplexMatrix;
use ugcn::model::{GraphContext, LayerConfig, Pooling, ScoreKind, Session, Task, UgcnParams};

fn check(cfg: LayerConfig, seed: u64) {
    for (name, rel) in gradient_errors(&cfg, seed) {
        assert!(rel < 1e-4, "{name}: relative error {rel:.3e} ({:?})", cfg.pooling);
    }
}

fn small(pooling: Pooling, task: Task) -> LayerConfig {
    LayerConfig {
        k: 2,
        k_t: 1,
        widths: vec![3, 4, 3],
        n_pool: 3,
        d: 6,
        pooling,
        task,
        ..LayerConfig::forecast()
    }
}

#[test]
fn custom_pool_forecast_gradients() {
    check(small(Pooling::Custom, Task::Forecast), 11);
}

#[test]
fn learnable_pool_fdi_gradients() {
    check(small(Pooling::Learnable, Task::Fdi), 12);
}

#[test]
fn real_score_gradients() {
    let mut cfg = small(Pooling::Learnable, Task::Forecast);
    cfg.score = ScoreKind::Real;
    check(cfg, 13);
}

#[test]
fn zero_input_gives_zero_first_layer_gradient() {
    let cfg = small(Pooling::Custom, Task::Forecast);
    let g = random_tree(6, 5);
    let ctx = GraphContext::new(&g, true).unwrap();
    let window = random_window(&cfg, 6, 5);
    let p = UgcnParams::init(&cfg, 5);
    let mut s = Session::new(&p, &cfg);
    let zero: Vec<_> = window.iter().map(|x| ComplexMatrix::zeros(x.rows(), x.cols())).collect();
    let y = s.forward(&ctx, &zero, 6).unwrap();
    let grads = s.backward(&y.values).unwrap();
    for taps in &grads.conv[0] {
        assert_eq!(taps.max_abs(), 0.0);
    }
}
