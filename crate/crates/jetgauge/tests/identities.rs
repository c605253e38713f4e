//! Commuting-diagram identities checked against independent reference paths.

use std::sync::Arc;

use jetgauge::bundles::{AssociatedPoint, FiberSpace};
use jetgauge::connections::*;
use jetgauge::groupoids::*;
use jetgauge::lie::{GroupKind, MatrixGroup};
use jetgauge::prolongation::*;
use jetgauge::sampling::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn groups() -> Vec<Arc<MatrixGroup>> {
    [GroupKind::U1, GroupKind::SO(3), GroupKind::SU2, GroupKind::GL(2)]
        .into_iter()
        .map(|k| MatrixGroup::new(k).unwrap())
        .collect()
}

fn fibers(g: &Arc<MatrixGroup>) -> Vec<FiberSpace> {
    vec![
        FiberSpace::linear(g),
        FiberSpace::adjoint(g),
        FiberSpace::conjugation(g),
        FiberSpace::left_translation(g),
        FiberSpace::twisted_linear(g),
    ]
}

fn scale(j: &SecondJetOfSection) -> f64 {
    j.curl.iter().fold(j.first.slope.amax().max(1.0), |m, c| m.max(c.amax()))
}

#[test]
fn je_action_matches_transformed_section() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for g in groups() {
        for fiber in fibers(&g) {
            for n in 1..=2 {
                for _ in 0..4 {
                    let b = sample_bisection(&g, n, 2, &mut rng).unwrap();
                    let phi = sample_section(&fiber, n, 2, &mut rng);
                    let x = sample_point(n, &mut rng);
                    let oracle = transformed_section_jet(&b, &phi, &fiber, &x).unwrap();
                    let first = act_jg_on_je(&jet_of_bisection(&b, &x).unwrap(), &jet_of_section(&phi, &x).unwrap(), &fiber)
                        .unwrap();
                    assert!(first.distance(&oracle.first) < 1e-10 * scale(&oracle), "{:?} {:?}", g.kind(), fiber);
                    let second = act_j2g_on_j2e(
                        &second_jet_of_bisection(&b, &x).unwrap(),
                        &second_jet_of_section(&phi, &x).unwrap(),
                        &fiber,
                    )
                    .unwrap();
                    let d = second.distance(&oracle);
                    assert!(d < 1e-9 * scale(&oracle), "{:?} {:?} n={n} d={d}", g.kind(), fiber);
                }
            }
        }
    }
}

#[test]
fn jet_of_product_is_product_of_jets() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for g in groups() {
        for n in 1..=3 {
            let b1 = sample_bisection(&g, n, 2, &mut rng).unwrap();
            let b2 = sample_bisection(&g, n, 2, &mut rng).unwrap();
            let x = sample_point(n, &mut rng);
            let j1 = jet_of_bisection(&b1, &x).unwrap();
            let j2 = jet_of_bisection(&b2, &j1.x_tgt).unwrap();
            let j21 = jet_of_bisection(&b1.then(&b2).unwrap(), &x).unwrap();
            assert!(j2.compose(&j1).unwrap().distance(&j21) < 1e-12);
            let inv = j21.invert().unwrap();
            assert!(inv.compose(&j21).unwrap().distance(&JetGroupoidElement::unit(&g, &x)) < 1e-12);
        }
    }
}

#[test]
fn bisection_second_jets_are_holonomous() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for g in groups() {
        let b = sample_bisection(&g, 2, 3, &mut rng).unwrap();
        let j = second_jet_of_bisection(&b, &[0.1, -0.2]).unwrap();
        assert_eq!(j.holonomy(1e-12), Holonomy::Holonomous);
        let s = sample_j2g_semiholonomous(&g, &[0.1, -0.2], &mut rng);
        assert_eq!(s.holonomy(1e-12), Holonomy::Semiholonomous);
    }
}

#[test]
fn minimal_coupling_is_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for g in groups() {
        for fiber in fibers(&g) {
            for n in 1..=2 {
                let x = sample_point(n, &mut rng);
                let u = sample_jg(&g, &x, &mut rng);
                let c = sample_cp(&g, &x, &mut rng);
                let j = sample_je(&fiber, &x, &mut rng);
                let lhs = minimal_coupling_jet(&act_jg_on_cp(&u, &c).unwrap(), &act_jg_on_je(&u, &j, &fiber).unwrap(), &fiber)
                    .unwrap();
                let rhs = minimal_coupling_jet(&c, &j, &fiber).unwrap().transport(&u, &fiber).unwrap();
                assert!(lhs.distance(&rhs) < 1e-10, "{:?} {:?}: {}", g.kind(), fiber, lhs.distance(&rhs));
            }
        }
    }
}

#[test]
fn curvature_is_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for g in groups() {
        for n in 1..=3 {
            let b = sample_bisection(&g, n, 2, &mut rng).unwrap();
            let x = sample_point(n, &mut rng);
            let u = second_jet_of_bisection(&b, &x).unwrap();
            let cj = sample_connection_jet(&g, &x, &mut rng);
            let moved = act_j2g_on_jcp(&u, &cj).unwrap();
            assert!(moved.value().distance(&act_jg_on_cp(&u.first, &cj.value()).unwrap()) < 1e-10);
            let lhs = curvature_of_jet(&moved).unwrap();
            let rhs = curvature_of_jet(&cj).unwrap().transport(&u.first.frame, &u.first.h, &u.first.x_tgt).unwrap();
            assert!(lhs.distance(&rhs) < 1e-9 * rhs.amax().max(1.0), "{:?} n={n}: {}", g.kind(), lhs.distance(&rhs));
        }
    }
}

#[test]
fn connection_jet_round_trips_through_p() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for g in groups() {
        let x = sample_point(2, &mut rng);
        let cj = sample_connection_jet(&g, &x, &mut rng);
        let back = read_connection_jet(&g, &lift_connection_jet(&cj).unwrap()).unwrap();
        assert!(back.distance(&cj) < 1e-13);
        let unit = SecondJetGroupoidElement::unit(&g, &x);
        assert!(act_j2g_on_jcp(&unit, &cj).unwrap().distance(&cj) < 1e-12);
    }
}

#[test]
fn cp_action_ignores_representative() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for g in groups() {
        let x = sample_point(2, &mut rng);
        let u = sample_jg(&g, &x, &mut rng);
        let c = sample_cp(&g, &x, &mut rng);
        let base = act_jg_on_cp(&u, &c).unwrap();
        for _ in 0..5 {
            let p = jetgauge::lie::sample_element(&g, &mut rng, 1.0);
            assert!(act_jg_on_cp_via(&u, &c, &p).unwrap().distance(&base) < 1e-12);
        }
        // closed form Ad(h)(c − Ξ)A⁻¹
        let ainv = u.frame.clone().try_inverse().unwrap();
        let expect = u.h.ad_map(&c.a.sub(&u.xi).unwrap().compose_right(&ainv)).unwrap();
        assert!(base.a.distance(&expect) < 1e-12);
    }
}

#[test]
fn pure_gauge_is_flat_and_matches_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for g in groups() {
        for n in 1..=3 {
            let factors = sample_pure_gauge_factors(&g, n, 2, &mut rng);
            let a = ConnectionForm::pure_gauge(&g, factors.clone()).unwrap();
            let b = Bisection::strict(&g, n, ConnectionForm::pure_gauge_group(&g, factors));
            let x = sample_point(n, &mut rng);
            assert!(curvature(&a, &x).unwrap().amax() < 1e-9);
            assert!(a.at(&x).unwrap().a.distance(&jet_of_bisection(&b, &x).unwrap().xi) < 1e-12);
        }
    }
}

#[test]
fn curvature_matches_field_strength_with_negative_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for g in groups() {
        let x = sample_point(3, &mut rng);
        let cj = sample_connection_jet(&g, &x, &mut rng);
        let f = curvature_of_jet(&cj).unwrap();
        let classical = classical_field_strength(&cj).unwrap();
        for mu in 0..3 {
            for nu in 0..3 {
                assert!((f.component(mu, nu) + classical.component(mu, nu)).amax() < 1e-13);
            }
        }
    }
}

#[test]
fn linear_minimal_coupling_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for g in groups() {
        let fiber = FiberSpace::linear(&g);
        let x = sample_point(2, &mut rng);
        let a = sample_connection(&g, 2, 2, &mut rng).unwrap();
        let phi = sample_section(&fiber, 2, 2, &mut rng);
        let d = minimal_coupling(&a, &phi, &fiber, &x).unwrap();
        let j = jet_of_section(&phi, &x).unwrap();
        let c = a.at(&x).unwrap();
        let q = nalgebra::DVector::from_column_slice(&j.value);
        for nu in 0..2 {
            let expect = j.slope.column(nu) + &c.a.columns()[nu] * &q;
            assert!((d.coefficients.column(nu) - expect).amax() < 1e-13);
        }
        let _ = AssociatedPoint::new(x.clone(), j.value.clone());
    }
}

#[test]
fn prolongation_quotients() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for g in groups() {
        for fiber in fibers(&g) {
            let n = 2;
            let x = sample_point(n, &mut rng);
            let pp = sample_prolonged_point(&g, &x, &mut rng);
            let u = sample_jet_group(&g, n, &mut rng);
            let uinv = u.inv().unwrap();
            let moved = pp.right_action(&u).unwrap();

            let t = sample_frame_tangent(&fiber, n, &mut rng);
            let lhs = iso_tangent(&moved, &uinv.act_tangent(&fiber, &t).unwrap(), &fiber).unwrap();
            assert!(lhs.distance(&iso_tangent(&pp, &t, &fiber).unwrap()) < 1e-11);

            let fj = sample_fiber_jet(&fiber, n, &mut rng);
            let lhs = iso_jet(&moved, &uinv.act_jet(&fiber, &fj).unwrap(), &fiber).unwrap();
            assert!(lhs.distance(&iso_jet(&pp, &fj, &fiber).unwrap()) < 1e-11);
            let lhs = iso_linjet(&moved, &uinv.act_linearized(&fiber, &fj).unwrap(), &fiber).unwrap();
            assert!(lhs.distance(&iso_linjet(&pp, &fj, &fiber).unwrap()) < 1e-11);

            let a0 = sample_cp_coordinate(&g, n, &mut rng);
            let lhs = iso_cp(&moved, &uinv.act_cp(&a0).unwrap()).unwrap();
            assert!(lhs.distance(&iso_cp(&pp, &a0).unwrap()) < 1e-11);
        }

        let x1 = sample_point(2, &mut rng);
        let x2 = sample_point(2, &mut rng);
        let x3 = sample_point(2, &mut rng);
        let (p1, p2, p3) = (
            sample_prolonged_point(&g, &x1, &mut rng),
            sample_prolonged_point(&g, &x2, &mut rng),
            sample_prolonged_point(&g, &x3, &mut rng),
        );
        let u = sample_jet_group(&g, 2, &mut rng);
        let j = jggg_map(&p2, &p1).unwrap();
        let j_moved = jggg_map(&p2.right_action(&u).unwrap(), &p1.right_action(&u).unwrap()).unwrap();
        assert!(j.distance(&j_moved) < 1e-11);
        let c = jggg_inverse(&j).unwrap();
        assert!(jggg_map_class(&c).unwrap().distance(&j) < 1e-12);
        assert!(ProlongedGaugeGroupoidElement::from_pair(&p2, &p1).unwrap().distance(&c) < 1e-11);
        let c32 = ProlongedGaugeGroupoidElement::from_pair(&p3, &p2).unwrap();
        let c21 = ProlongedGaugeGroupoidElement::from_pair(&p2, &p1).unwrap();
        let composed = jggg_map_class(&c32.compose(&c21).unwrap()).unwrap();
        let expect = jggg_map(&p3, &p2).unwrap().compose(&jggg_map(&p2, &p1).unwrap()).unwrap();
        assert!(composed.distance(&expect) < 1e-10);
        let u1 = sample_jg(&g, &x1, &mut rng);
        let u2 = sample_jg(&g, &u1.x_tgt, &mut rng);
        let lhs = jggg_inverse(&u2.compose(&u1).unwrap()).unwrap();
        let rhs = jggg_inverse(&u2).unwrap().compose(&jggg_inverse(&u1).unwrap()).unwrap();
        assert!(lhs.distance(&rhs) < 1e-10);
    }
}
