mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use ugcn::caseio::bundled_graph;
use ugcn::fdi::{build_stealth_attack, inject, sample_attack_config, stealth_residual, BASE_MAGNITUDE};
use ugcn::grid::{build_admittance, build_gso};
use ugcn::linalg::{regularized_solve, vec_norm, vec_sub, ComplexMatrix, C64};
use ugcn::rng;
use ugcn::scenario::estimation::{build_pmu_matrix, estimate_pmu};
use ugcn::scenario::calibrate_load_scale;
use ugcn::scenario::powerflow::{nodal_mismatch, solve_powerflow};

fn loads(g: &ugcn::grid::GridGraph, scale: f64) -> Vec<C64> {
    g.nominal_load.iter().map(|l| l * scale).collect()
}

#[test]
fn radial_flow_balances_at_every_bus() {
    for name in ["ieee33", "ieee69"] {
        let g = bundled_graph(name).unwrap();
        let y = build_admittance(&g).unwrap();
        for scale in [0.2, 1.0, 1.5] {
            let d = loads(&g, scale);
            let v = solve_powerflow(&g, &d).unwrap();
            assert!(nodal_mismatch(&y, &v, &d, g.root_index()) < 1e-8, "{name} at {scale}");
            assert_eq!(v[g.root_index()], C64::new(1.0, 0.0));
        }
        let flat = solve_powerflow(&g, &vec![C64::new(0.0, 0.0); g.n()]).unwrap();
        assert!(flat.iter().all(|&v| v == C64::new(1.0, 0.0)), "{name}");
    }
}

#[test]
fn meshed_flow_balances() {
    for name in ["ieee30", "ieee39"] {
        let g = bundled_graph(name).unwrap();
        let y = build_admittance(&g).unwrap();
        let d = loads(&g, calibrate_load_scale(&g));
        let v = solve_powerflow(&g, &d).unwrap();
        assert!(nodal_mismatch(&y, &v, &d, g.root_index()) < 1e-8, "{name}");
    }
}

fn to_na(m: &ComplexMatrix) -> DMatrix<C64> {
    m.to_nalgebra()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn regularized_solve_matches_svd_oracle(m in 1usize..10, n in 1usize..8, mu in 0.0f64..1.0, seed in any::<u64>()) {
        let mut r = rng::stream(seed, &[11]);
        let h = random_cmat(m, n, &mut r);
        let b = random_cmat(n, n, &mut r);
        let s = b.adjoint().matmul(&b).unwrap();
        let z = random_cmat(m, 1, &mut r);
        let z: Vec<C64> = z.as_slice().to_vec();
        let got = regularized_solve(&h, &z, &s, mu).unwrap();
        let hn = to_na(&h);
        let normal = hn.adjoint() * &hn + to_na(&s) * C64::new(mu, 0.0);
        let eps = 1e-10 * normal.norm().max(1.0);
        let pinv = normal.pseudo_inverse(eps).unwrap();
        let want = pinv * hn.adjoint() * nalgebra::DVector::from_vec(z);
        let err: f64 = got.iter().zip(want.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let scale = want.iter().map(|x| x.norm()).fold(1.0, f64::max);
        prop_assert!(err < 1e-8 * scale, "error {err:e}");
    }

    #[test]
    fn stealth_attacks_hide_from_honest_rows(seed in any::<u64>()) {
        let g = bundled_graph("ieee30").unwrap();
        let y = build_admittance(&g).unwrap();
        let pmu: Vec<usize> = (0..30).step_by(2).collect();
        let (sub, omega) = sample_attack_config(pmu.len(), seed);
        let target: Vec<usize> = sub.iter().map(|&i| pmu[i]).collect();
        if let Ok(a) = build_stealth_attack(&y, &pmu, &target, omega, seed) {
            prop_assert!(stealth_residual(&y, &pmu, &a) < 1e-10);
            if !target.is_empty() {
                let inf = a.delta_v.iter().map(|z| z.norm()).fold(0.0, f64::max);
                prop_assert!((inf - BASE_MAGNITUDE).abs() < 1e-12);
            }
            for (i, l) in a.labels.iter().enumerate() {
                prop_assert!(*l == 0 || target.contains(&i));
            }
        }
    }
}

#[test]
fn least_squares_residual_ignores_stealth_injection() {
    let g = bundled_graph("ieee30").unwrap();
    let y = build_admittance(&g).unwrap();
    let s = build_gso(&y).unwrap().matrix;
    let v = solve_powerflow(&g, &loads(&g, 0.3)).unwrap();
    let pmu: Vec<usize> = (0..30).step_by(2).collect();
    let h = build_pmu_matrix(&y, &pmu);
    let z = h.mul_vec(&v).unwrap();
    let residual = |z: &[C64]| {
        let x = estimate_pmu(&y, &s, z, &pmu, 0.0).unwrap();
        vec_norm(&vec_sub(z, &h.mul_vec(&x).unwrap()))
    };
    let clean = residual(&z);
    let mut tried = 0;
    for seed in 0..40 {
        let (sub, omega) = sample_attack_config(pmu.len(), seed);
        let target: Vec<usize> = sub.iter().map(|&i| pmu[i]).collect();
        let Ok(a) = build_stealth_attack(&y, &pmu, &target, omega, seed) else { continue };
        let za = inject(&z, &h, &a.delta_v, omega).unwrap();
        assert!((residual(&za) - clean).abs() < 1e-8);
        tried += 1;
    }
    assert!(tried > 20);
}
