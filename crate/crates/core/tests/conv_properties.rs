mod common;

use common::*;
use proptest::prelude::*;
use ugcn::linalg::{ComplexMatrix, C64};
use ugcn::model::{conv_forward, model_forward, GraphContext, LayerConfig, Pooling, UgcnParams};
use ugcn::rng;

fn instance(n: usize, f_in: usize, f_out: usize, k: usize, k_t: usize, seed: u64) -> (ComplexMatrix, Vec<ComplexMatrix>, Vec<ComplexMatrix>) {
    let mut r = rng::stream(seed, &[7]);
    let s = random_shift(n, &mut r);
    let x = (0..=k_t).map(|_| random_cmat(n, f_in, &mut r)).collect();
    let h = (0..(k + 1) * (k_t + 1)).map(|_| random_cmat(f_in, f_out, &mut r)).collect();
    (s, x, h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conv_matches_loop_oracle(n in 1usize..=12, f_in in 1usize..4, f_out in 1usize..4, k in 0usize..4, k_t in 0usize..3, seed in any::<u64>()) {
        let (s, x, h) = instance(n, f_in, f_out, k, k_t, seed);
        let fast = conv_forward(&s, &x, &h, k, k_t).unwrap();
        prop_assert!(max_diff(&fast, &naive_conv(&s, &x, &h, k, k_t)) < 1e-10);
    }

    #[test]
    fn polynomial_filter_commutes_with_shift(n in 1usize..=12, k in 0usize..5, seed in any::<u64>()) {
        let mut r = rng::stream(seed, &[8]);
        let s = random_shift(n, &mut r);
        let coeffs = random_cmat(1, k + 1, &mut r);
        let mut filt = ComplexMatrix::zeros(n, n);
        let mut sk = ComplexMatrix::identity(n);
        for c in coeffs.row(0) {
            filt = filt.add(&sk.scale(*c)).unwrap();
            sk = sk.matmul(&s).unwrap();
        }
        let comm = filt.matmul(&s).unwrap().sub(&s.matmul(&filt).unwrap()).unwrap();
        prop_assert!(comm.frobenius_norm() < 1e-9);
    }

    #[test]
    fn conv_is_permutation_equivariant(n in 1usize..=12, k in 0usize..4, k_t in 0usize..3, seed in any::<u64>()) {
        let (s, x, h) = instance(n, 3, 2, k, k_t, seed);
        let p = random_perm(n, &mut rng::stream(seed, &[9]));
        let y = conv_forward(&s, &x, &h, k, k_t).unwrap();
        let xp: Vec<_> = x.iter().map(|m| permute_rows(m, &p)).collect();
        let yp = conv_forward(&permute_sym(&s, &p), &xp, &h, k, k_t).unwrap();
        prop_assert!(max_diff(&yp, &permute_rows(&y, &p)) < 1e-10);
    }

    #[test]
    fn learnable_model_is_permutation_equivariant(n in 2u32..=12, seed in any::<u64>()) {
        let cfg = LayerConfig { k_t: 1, widths: vec![10, 4], n_pool: 3, d: 8, pooling: Pooling::Learnable, ..LayerConfig::fdi() };
        let g = random_tree(n, seed);
        let ctx = GraphContext::new(&g, true).unwrap();
        let mut r = rng::stream(seed, &[10]);
        let window: Vec<_> = (0..cfg.window_len()).map(|_| random_cmat(n as usize, 10, &mut r)).collect();
        let params = UgcnParams::init(&cfg, seed);
        let y = model_forward(&ctx, &window, &params, &cfg, n as usize).unwrap();
        let p = random_perm(n as usize, &mut r);
        let ctx_p = GraphContext::from_parts(permute_sym(&ctx.gso, &p), ctx.order.clone()).unwrap();
        let wp: Vec<_> = window.iter().map(|m| permute_rows(m, &p)).collect();
        let yp = model_forward(&ctx_p, &wp, &params, &cfg, n as usize).unwrap();
        // Learnable pooling is order-free, so the pooled latent and hence the
        // position-decoded output are unchanged.
        for (a, b) in y.values.data.iter().zip(&yp.values.data) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn conv_rejects_bad_shapes() {
    let (s, x, h) = instance(4, 2, 2, 1, 1, 3);
    assert!(conv_forward(&s, &x[..1], &h, 1, 1).is_err());
    assert!(conv_forward(&s, &x, &h[..3], 1, 1).is_err());
    let bad = vec![ComplexMatrix::zeros(5, 2), ComplexMatrix::zeros(5, 2)];
    assert!(conv_forward(&s, &bad, &h, 1, 1).is_err());
}

#[test]
fn identity_filter_passes_positive_input() {
    let (s, _, _) = instance(5, 3, 3, 0, 0, 4);
    let x = ComplexMatrix::from_fn(5, 3, |i, j| C64::new(0.1 + i as f64, 0.5 + j as f64));
    let y = conv_forward(&s, &[x.clone()], &[ComplexMatrix::identity(3)], 0, 0).unwrap();
    assert_eq!(y, x);
    let zero = conv_forward(&s, &[ComplexMatrix::zeros(5, 3)], &[ComplexMatrix::identity(3)], 0, 0).unwrap();
    assert_eq!(zero.max_abs(), 0.0);
}
