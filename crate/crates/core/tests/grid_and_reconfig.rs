mod common;

use common::*;
use proptest::prelude::*;
use ugcn::caseio::{bundled_graph, load_case, parse_case, BUNDLED_CASES};
use ugcn::grid::{build_admittance, build_gso};
use ugcn::linalg::C64;
use ugcn::reconfig::{apply_op, augment, transmission_augment, AugmentConfig};

#[test]
fn bundled_cases_survive_json() {
    for name in BUNDLED_CASES {
        let case = load_case(name).unwrap();
        let back = parse_case(&case.to_json()).unwrap();
        assert_eq!(back.buses, case.buses, "{name}");
        assert_eq!(back.branches, case.branches, "{name}");
        assert_eq!(back.to_json(), case.to_json(), "{name}");
    }
}

#[test]
fn bundled_shapes() {
    for (name, n) in [("ieee33", 33), ("ieee69", 69), ("ieee30", 30), ("ieee39", 39), ("ieee57", 57)] {
        let g = bundled_graph(name).unwrap();
        assert_eq!(g.n(), n, "{name}");
        assert!(g.is_connected(), "{name}");
    }
    assert!(bundled_graph("ieee33").unwrap().is_rooted_tree());
    assert!(bundled_graph("ieee69").unwrap().is_rooted_tree());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn admittance_is_symmetric_with_zero_row_sums(n in 2u32..30, seed in any::<u64>()) {
        let g = random_tree(n, seed);
        let y = build_admittance(&g).unwrap();
        for i in 0..g.n() {
            let sum: C64 = y.row(i).iter().sum();
            prop_assert!(sum.norm() < 1e-9);
            for j in 0..g.n() {
                prop_assert!((y[(i, j)] - y[(j, i)]).norm() < 1e-12);
            }
        }
        let s = build_gso(&y).unwrap();
        prop_assert_eq!(s.n(), g.n());
        prop_assert!(s.matrix.is_finite());
    }

    #[test]
    fn distribution_variants_are_rooted_trees(seed in any::<u64>()) {
        let base = bundled_graph("ieee33").unwrap();
        let cfg = AugmentConfig { q_count: 8, seed, ..AugmentConfig::default() };
        for a in augment(&base, &cfg).unwrap() {
            let g = &a.graph;
            prop_assert!(g.is_rooted_tree());
            prop_assert!(g.contains(base.root.unwrap()));
            prop_assert!((22..=38).contains(&g.n()));
            prop_assert!(!a.ops.is_empty());
        }
    }

    #[test]
    fn op_logs_replay(seed in any::<u64>()) {
        let base = bundled_graph("ieee33").unwrap();
        let cfg = AugmentConfig { q_count: 4, seed, ..AugmentConfig::default() };
        for a in augment(&base, &cfg).unwrap() {
            let mut g = base.clone();
            for op in &a.ops {
                g = apply_op(&g, op).unwrap();
            }
            prop_assert_eq!(g.canonicalized(), a.graph.canonicalized());
        }
    }

    #[test]
    fn transmission_variants_stay_connected(seed in any::<u64>()) {
        let base = bundled_graph("ieee30").unwrap();
        for a in transmission_augment(&base, &AugmentConfig::transmission(8, base.n(), seed)).unwrap() {
            prop_assert!(a.graph.is_connected());
            prop_assert_eq!(a.graph.n(), 30);
        }
    }
}

#[test]
fn augmentation_is_seeded() {
    let base = bundled_graph("ieee69").unwrap();
    let cfg = AugmentConfig { q_count: 10, node_bounds: (55, 80), seed: 3, ..AugmentConfig::default() };
    let a = augment(&base, &cfg).unwrap();
    assert_eq!(a, augment(&base, &cfg).unwrap());
    let other = augment(&base, &AugmentConfig { seed: 4, ..cfg }).unwrap();
    assert_ne!(a, other);
}
