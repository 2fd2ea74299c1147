mod common;

use common::*;
use proptest::prelude::*;
use ugcn::caseio::bundled_graph;
use ugcn::linalg::{ComplexMatrix, C64};
use ugcn::model::{
    cluster_sizes, decode_checkpoint, encode_checkpoint, model_forward, pool_custom, pool_learnable, Checkpoint, GraphContext,
    LayerConfig, Pooling, ScoreKind, Task, UgcnParams,
};
use ugcn::rng;

#[test]
fn cluster_sizes_of_examples() {
    let mut a = cluster_sizes(13, 4).unwrap();
    assert_eq!(a, vec![4, 3, 3, 3]);
    a.sort_unstable();
    assert_eq!(a, vec![3, 3, 3, 4]);
    assert_eq!(cluster_sizes(10, 4).unwrap(), vec![3, 3, 2, 2]);
    assert!(cluster_sizes(3, 4).is_err());
}

#[test]
fn custom_pool_matches_block_oracle() {
    let mut r = rng::stream(5, &[1]);
    let x = random_cmat(10, 3, &mut r);
    let order = random_perm(10, &mut r);
    let y = pool_custom(&x, 4, &order).unwrap();
    assert_eq!((y.rows(), y.cols()), (4, 6));
    let mut start = 0;
    for (c, size) in [3, 3, 2, 2].into_iter().enumerate() {
        let members = &order[start..start + size];
        for f in 0..3 {
            let mean = members.iter().map(|&m| x[(m, f)]).sum::<C64>() / size as f64;
            let re = members.iter().map(|&m| x[(m, f)].re).fold(f64::MIN, f64::max);
            let im = members.iter().map(|&m| x[(m, f)].im).fold(f64::MIN, f64::max);
            assert!((y[(c, f)] - mean).norm() < 1e-15);
            assert_eq!(y[(c, 3 + f)], C64::new(re, im));
        }
        start += size;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn custom_pool_width_is_fixed(n in 1usize..40, n_p in 1usize..10, f in 1usize..5, seed in any::<u64>()) {
        prop_assume!(n >= n_p);
        let mut r = rng::stream(seed, &[2]);
        let x = random_cmat(n, f, &mut r);
        let y = pool_custom(&x, n_p, &(0..n).collect::<Vec<_>>()).unwrap();
        prop_assert_eq!((y.rows(), y.cols()), (n_p, 2 * f));
    }

    #[test]
    fn learnable_rows_are_stochastic(n in 1usize..40, n_p in 1usize..10, f in 1usize..5, real in any::<bool>(), seed in any::<u64>()) {
        let mut r = rng::stream(seed, &[3]);
        let x = random_cmat(n, f, &mut r).scale(C64::new(5.0, 0.0));
        let w = random_cmat(n_p, f, &mut r);
        let score = if real { ScoreKind::Real } else { ScoreKind::Modulus };
        let (a, y) = pool_learnable(&x, &w, score).unwrap();
        prop_assert_eq!((y.rows(), y.cols()), (n_p, f));
        for row in &a {
            prop_assert_eq!(row.len(), n);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

fn audit_config(pooling: Pooling, task: Task) -> LayerConfig {
    LayerConfig {
        k_t: 1,
        widths: vec![10, 8, 8],
        d: 16,
        pooling,
        task,
        ..LayerConfig::forecast()
    }
}

#[test]
fn one_parameter_set_serves_every_size() {
    let graphs = vec![
        random_tree(10, 1),
        random_tree(22, 2),
        bundled_graph("ieee33").unwrap(),
        random_tree(38, 3),
        bundled_graph("ieee57").unwrap(),
    ];
    for (pooling, task) in [(Pooling::Custom, Task::Forecast), (Pooling::Learnable, Task::Fdi)] {
        let cfg = audit_config(pooling, task);
        let params = UgcnParams::init(&cfg, 9);
        let before = encode_checkpoint(&Checkpoint::new(cfg.clone(), params.clone()));
        let sum = params.checksum();
        for g in &graphs {
            let n = g.n();
            let ctx = GraphContext::new(g, true).unwrap();
            let mut r = rng::stream(n as u64, &[4]);
            let window: Vec<_> = (0..cfg.window_len()).map(|_| random_cmat(n, 10, &mut r)).collect();
            let y = model_forward(&ctx, &window, &params, &cfg, n).unwrap();
            assert_eq!((y.values.rows, y.values.cols), (n, cfg.n_outputs()));
            assert!(y.values.data.iter().all(|v| v.is_finite()));
        }
        assert_eq!(params.checksum(), sum);
        assert_eq!(encode_checkpoint(&Checkpoint::new(cfg.clone(), params.clone())), before);
    }
}

#[test]
fn too_few_nodes_for_custom_pool() {
    let cfg = audit_config(Pooling::Custom, Task::Forecast);
    let g = random_tree(5, 1);
    let ctx = GraphContext::new(&g, true).unwrap();
    let window = vec![ComplexMatrix::zeros(5, 10); cfg.window_len()];
    assert!(model_forward(&ctx, &window, &UgcnParams::init(&cfg, 1), &cfg, 5).is_err());
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let cfg = audit_config(Pooling::Learnable, Task::Fdi);
    let mut ck = Checkpoint::new(cfg.clone(), UgcnParams::init(&cfg, 4));
    ck.extra.push(("note".into(), b"hello".to_vec()));
    let bytes = encode_checkpoint(&ck);
    let back = decode_checkpoint(&bytes).unwrap();
    assert_eq!(back.config, cfg);
    assert_eq!(back.params.to_flat(), ck.params.to_flat());
    assert_eq!(back.extra("note"), Some(&b"hello"[..]));
    assert_eq!(encode_checkpoint(&back), bytes);
    let mut bad = bytes.clone();
    let mid = bad.len() / 2;
    bad[mid] ^= 0xff;
    assert!(decode_checkpoint(&bad).is_err());
    assert!(decode_checkpoint(&bytes[..bytes.len() - 3]).is_err());
}
