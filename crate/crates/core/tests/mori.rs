mod common;

use charfol::certify::Verdict;
use charfol::dynamics::Kind;
use charfol::mori::*;
use charfol::numeric::NumericPolicy;
use common::{axis_zero_bisection, theta_bump_integral_simpson, torus_radius_bisection};
use proptest::prelude::*;
use std::f64::consts::TAU;

#[test]
fn constants_match_bisection() {
    let k = MoriConstants::new(0.1);
    assert!((k.r_star - torus_radius_bisection(0.1)).abs() < 1e-12);
    assert!((k.zero_z - axis_zero_bisection(0.1)).abs() < 1e-12);
    assert!((k.r_star - 0.876548).abs() < 1e-6);
    assert!((k.zero_z - 0.104881).abs() < 1e-6);
    assert!((k.orbit_z - 0.0316227).abs() < 1e-7);
    // p lies on the projected ellipsoid r² + ρ²/ε² = 1 + ε.
    assert!((k.r_star.powi(2) + (k.rho_star / 0.1).powi(2) - 1.1).abs() < 1e-12);
}

#[test]
fn scene_rejects_bad_parameters() {
    assert!(MoriScene::new(1, 0.1).is_err());
    assert!(MoriScene::new(2, 0.0).is_err());
    assert!(MoriScene::new(2, 0.5).is_err());
    assert!(MoriScene::new(2, 0.2).unwrap().warnings.len() == 1);
}

#[test]
fn lemma_field_is_positively_proportional() {
    let s = MoriScene::new(2, 0.1).unwrap();
    let r = verify_foliation_lemma(&s, 200, 1, ClosedFormVariant::Corrected, None).unwrap();
    assert!(r.passed && r.max_angle < 1e-8 && r.antiparallel == 0, "{r:?}");
    let s3 = MoriScene::new(3, 0.1).unwrap();
    let r3 = verify_foliation_lemma(&s3, 50, 2, ClosedFormVariant::Corrected, None).unwrap();
    assert!(r3.passed, "{r3:?}");
}

#[test]
fn unscaled_rho_component_is_not_tangent() {
    let s = MoriScene::new(2, 0.1).unwrap();
    let r = verify_foliation_lemma(&s, 50, 1, ClosedFormVariant::Unscaled, None).unwrap();
    assert!(!r.passed && r.max_angle > 1e-4, "{r:?}");
}

#[test]
fn flipped_component_is_detected() {
    let s = MoriScene::new(2, 0.1).unwrap();
    for c in 0..s.dim() {
        let r = verify_foliation_lemma(&s, 50, 3, ClosedFormVariant::Corrected, Some(c)).unwrap();
        assert!(!r.passed, "flipping component {c} went unnoticed");
    }
}

#[test]
fn pushforward_saddle_at_torus_radius() {
    let s = MoriScene::new(2, 0.1).unwrap();
    let k = s.constants;
    let z = pushforward_zero(&s, [0.0, k.r_star + 0.01, k.rho_star * 0.9], ClosedFormVariant::Corrected).unwrap();
    assert!(z.saddle);
    assert!((z.point[1] - torus_radius_bisection(0.1)).abs() < 1e-9, "{z:?}");
}

#[test]
fn reproduce_census_and_torus() {
    let (d, rows) = reproduce(2, 0.1, NumericPolicy::default(), 0).unwrap();
    assert!(d.passed, "{:?}", d.checks);
    let zeros: Vec<_> = d.elements.iter().filter(|e| e.kind == Kind::Zero).collect();
    let orbits: Vec<_> = d.elements.iter().filter(|e| e.kind == Kind::Orbit).collect();
    assert_eq!((zeros.len(), orbits.len()), (2, 2));
    let zz = axis_zero_bisection(0.1);
    for e in &zeros {
        assert!((e.location[0].abs() - zz).abs() < 1e-8);
        assert!(e.location[1].hypot(e.location[2]) < 1e-8);
        // The source sits at negative z.
        assert_eq!(e.sign, if e.location[0] < 0.0 { 1 } else { -1 });
    }
    for e in &orbits {
        assert!((e.location[0].abs() - 0.1f64.powf(1.5)).abs() < 1e-6);
        assert_eq!(e.sign as f64, e.location[0].signum());
        assert!(e.checks.iter().all(|c| c.passed), "{:?}", e.checks);
    }
    let r = d.torus.recurrence.refined_point[1].hypot(d.torus.recurrence.refined_point[2]);
    assert!(d.torus.recurrence.fired);
    assert!((r - torus_radius_bisection(0.1)).abs() < 1e-6);
    assert!((d.torus.slope_measured - d.torus.slope_expected).abs() < 1e-6 * d.torus.slope_expected);
    assert_eq!(d.certificate.verdict, Verdict::Fail);
    assert!(!rows.is_empty());
}

#[test]
fn column_moduli_match_quadrature_oracle() {
    let spec = PerturbationSpec::default();
    let d = perturb(spec, NumericPolicy::default(), 0, 8).unwrap();
    assert!(d.passed, "{:?}", d.checks);
    let b = theta_bump_integral_simpson();
    assert!((d.oracle.bump_integral - b).abs() < 1e-10);
    let tk = TAU * spec.kappa;
    for m in &d.moduli {
        let s = if m.phi.cos() > 0.0 { -1.0 } else { 1.0 };
        let mut want = [(s * spec.delta * b).exp(), (tk + s * spec.delta * b).exp(), (-tk).exp()];
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, w) in m.measured.iter().zip(&want) {
            assert!((got - w).abs() / w < 1e-4, "{m:?}");
        }
    }
    assert_eq!(d.certificate.verdict, Verdict::Pass);
    assert!(d.margin > 0.05);
}

#[test]
fn unperturbed_column_has_closed_leaves() {
    let spec = PerturbationSpec { delta: 0.0, ..PerturbationSpec::default() };
    let d = perturb(spec, NumericPolicy::default(), 0, 4).unwrap();
    assert!(d.recurrence.fired);
    assert_ne!(d.certificate.verdict, Verdict::Pass);
}

#[test]
fn theta_bump_shape() {
    assert!((theta_bump(std::f64::consts::PI, 0.0) - 1.0).abs() < 1e-15);
    assert_eq!(theta_bump(0.0, 0.0), 0.0);
    assert_eq!(theta_bump(1.0, 0.0), 0.0);
    assert!(theta_bump(2.0, 0.0) > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constants_solve_their_equations(eps in 0.01f64..0.3) {
        let k = MoriConstants::new(eps);
        prop_assert!((k.r_star - torus_radius_bisection(eps)).abs() < 1e-10);
        prop_assert!((k.zero_z - axis_zero_bisection(eps)).abs() < 1e-10);
        let s = MoriScene::new(2, eps).unwrap();
        let x = s.pushforward_field(&[0.0, k.r_star, k.rho_star], ClosedFormVariant::Corrected);
        prop_assert!(x.iter().all(|c| c.abs() < 1e-10));
    }
}
