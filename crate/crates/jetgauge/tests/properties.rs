use jetgauge::groupoids::{act_jg_on_je, jet_of_bisection, jet_of_section, transformed_section_jet};
use jetgauge::bundles::FiberSpace;
use jetgauge::lie::{bracket, random_algebra, random_element, GroupKind, MatrixGroup};
use jetgauge::sampling::{sample_bisection, sample_point, sample_section};
use jetgauge::taylor::{seed_coordinates, TaylorScalar};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn group_kind() -> impl Strategy<Value = GroupKind> {
    prop_oneof![
        Just(GroupKind::U1),
        Just(GroupKind::SU2),
        (2usize..=4).prop_map(GroupKind::SO),
        (1usize..=3).prop_map(GroupKind::GL),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_and_chain_rules(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let x = seed_coordinates(&[a, b]).unwrap();
        let f: TaylorScalar = x[0] * x[1].sin();
        prop_assert!((f.d(0) - b.sin()).abs() < 1e-14);
        prop_assert!((f.d(1) - a * b.cos()).abs() < 1e-14);
        prop_assert!((f.d2(0, 1) - b.cos()).abs() < 1e-14);
        prop_assert!((f.d2(1, 1) + a * b.sin()).abs() < 1e-14);
        let g = (x[0] * x[1]).exp();
        prop_assert!((g.d2(0, 0) - b * b * (a * b).exp()).abs() < 1e-12 * (1.0 + (a * b).exp() * b * b));
    }

    #[test]
    fn adjoint_preserves_brackets(kind in group_kind(), seed in any::<u64>()) {
        let group = MatrixGroup::new(kind).unwrap();
        let g = random_element(&group, seed, 1.0);
        let (x, y) = (random_algebra(&group, seed ^ 1, 1.0), random_algebra(&group, seed ^ 2, 1.0));
        let lhs = g.ad(&bracket(&x, &y).unwrap()).unwrap();
        let rhs = bracket(&g.ad(&x).unwrap(), &g.ad(&y).unwrap()).unwrap();
        prop_assert!(lhs.distance(&rhs) < 1e-11);
    }

    #[test]
    fn exp_lands_in_group(kind in group_kind(), seed in any::<u64>()) {
        let group = MatrixGroup::new(kind).unwrap();
        let g = random_algebra(&group, seed, 1.0).exp();
        prop_assert!(g.membership_residual() < 1e-12);
        let back = g.mul(&g.inv().unwrap()).unwrap();
        prop_assert!(back.distance(&group.identity()) < 1e-12);
    }

    #[test]
    fn jet_action_tracks_transformed_sections(n in 1usize..=3, seed in any::<u64>()) {
        let group = MatrixGroup::new(GroupKind::SO(3)).unwrap();
        let fiber = FiberSpace::adjoint(&group);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = sample_bisection(&group, n, 2, &mut rng).unwrap();
        let phi = sample_section(&fiber, n, 2, &mut rng);
        let x = sample_point(n, &mut rng);
        let got = act_jg_on_je(&jet_of_bisection(&b, &x).unwrap(), &jet_of_section(&phi, &x).unwrap(), &fiber).unwrap();
        let oracle = transformed_section_jet(&b, &phi, &fiber, &x).unwrap();
        prop_assert!(got.distance(&oracle.first) < 1e-9);
    }
}
