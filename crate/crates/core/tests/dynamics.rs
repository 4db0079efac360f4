use charfol::contact::*;
use charfol::dynamics::*;
use charfol::exterior::Chart;
use charfol::numeric::{linalg, NumericPolicy};
use std::sync::Arc;

/// On {z = 0} with α = dz + λ(x, y), i_X(dx∧dy) = λ, so λ = X_x dy − X_y dx.
fn plane_scene(lx: &str, ly: &str) -> Foliation {
    let chart = Arc::new(Chart::new(&[("x", false), ("y", false), ("z", false)], &[("k", 0.3)]).unwrap());
    let scene = Arc::new(ContactScene::from_coefficients(chart.clone(), &[lx, ly, "1"]).unwrap());
    let s = Hypersurface::level_set(chart.clone(), chart.coord("z"), 0.0).unwrap();
    Foliation::new(scene, Arc::new(s), NumericPolicy::default()).unwrap()
}

// X = A (x, y) with A = [[2, 1], [0, -1]]
fn saddle() -> Foliation {
    plane_scene("y", "2*x + y")
}

#[test]
fn linear_saddle_matches_matrix_exponential() {
    let fol = saddle();
    let flow = Flow::new(&fol).with_options(FlowOptions::orbit(&fol.policy));
    let p0 = [0.3, -0.2, 0.0];
    let run = flow.integrate(&p0, 1.0).unwrap();
    let e = linalg::expm(&[2.0, 1.0, 0.0, -1.0], 2);
    let want = [e[0] * p0[0] + e[1] * p0[1], e[2] * p0[0] + e[3] * p0[1]];
    let got = run.point();
    assert!((got[0] - want[0]).abs() < 1e-7 && (got[1] - want[1]).abs() < 1e-7, "{got:?} {want:?}");
    assert!(run.max_residual < 1e-9);
}

#[test]
fn variational_matrix_matches_exponential() {
    let fol = saddle();
    let flow = Flow::new(&fol).with_options(FlowOptions::orbit(&fol.policy)).with_variational();
    let run = flow.run_state(flow.initial(&[0.1, 0.1, 0.0]), &Stop::time(0.7)).unwrap();
    let phi = run.phi().unwrap();
    let e = linalg::expm(&[2.0 * 0.7, 0.7, 0.0, -0.7], 2);
    assert!((phi[0] - e[0]).abs() < 1e-8 && (phi[1] - e[1]).abs() < 1e-8 && (phi[4] - e[3]).abs() < 1e-8);
}

#[test]
fn saddle_zero_is_found_and_classified() {
    let fol = saddle();
    let found = find_zeros(&fol, &[vec![0.2, 0.1, 0.0], vec![-0.1, 0.05, 0.0]]);
    assert_eq!(found.zeros.len(), 1);
    let z = linearize_zero(&fol, &found.zeros[0]).unwrap();
    let mut re: Vec<f64> = z.eigenvalues.iter().map(|e| e[0]).collect();
    re.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!((re[0] + 1.0).abs() < 1e-10 && (re[1] - 2.0).abs() < 1e-10);
    assert_eq!(z.sign, 1);
    assert_eq!(z.stable_index, 1);
    assert!(z.hyperbolic && z.checks_passed());
}

#[test]
fn source_has_index_zero() {
    let fol = plane_scene("-2*y", "x");
    let z = linearize_zero(&fol, &[0.0, 0.0, 0.0]).unwrap();
    assert_eq!((z.sign, z.stable_index), (1, 0));
    let rev = linearize_zero(&fol.reversed(), &[0.0, 0.0, 0.0]).unwrap();
    assert_eq!(rev.sign, -1);
    assert_eq!(rev.unstable_index, 0);
}

#[test]
fn degenerate_region_gives_constant_trajectory() {
    // X = (x, 2y) vanishes only at the origin; start there
    let fol = plane_scene("-2*y", "x");
    let run = Flow::new(&fol).integrate(&[0.0, 0.0, 0.0], 2.0).unwrap();
    assert!(run.point().iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn limit_cycle_multiplier() {
    // X = (-y + k x (1 - r²), x + k y (1 - r²)); div = -2k on r = 1
    let fol = plane_scene("-(x + k*y*(1 - x^2 - y^2))", "-y + k*x*(1 - x^2 - y^2)");
    let sec = FieldSection::new(fol.surface.chart.parse("y").unwrap());
    let an = find_orbit(&fol, &sec, &[1.05, 0.0, 0.0], &OrbitOptions::default()).unwrap();
    let want = -2.0 * 0.3 * 2.0 * std::f64::consts::PI;
    assert!((an.log_c - want).abs() < 1e-6, "{} {}", an.log_c, want);
    assert!((an.fixed_point[0] - 1.0).abs() < 1e-9);
    assert!((an.period - 2.0 * std::f64::consts::PI).abs() < 1e-8);
    let el = classify_orbit(&an, 1, 1e-6, 1e-6);
    assert_eq!(el.sign, -1);
    assert!(el.hyperbolic && el.checks_passed(), "{:?}", el.checks);
}

#[test]
fn synthetic_return_map_blocks() {
    // diag(C, √C S) with S symplectic, C = 2, n = 2
    let c: f64 = 2.0;
    let s = [2.0, 3.0, 1.0, 2.0];
    let r = c.sqrt();
    let a = vec![c, 0.0, 0.0, 0.0, r * s[0], r * s[1], 0.0, r * s[2], r * s[3]];
    let sp = chain_spectrum(&[Block { a, m: 3 }], 2).unwrap();
    assert!((sp.c - 2.0).abs() < 1e-14);
    assert!(sp.det < 1e-12 && sp.pairing < 1e-12 && sp.symplectic < 1e-12);
}

#[test]
fn unit_multiplier_is_not_hyperbolic() {
    let c = 1.0 + 1e-12;
    let sp = chain_spectrum(&[Block { a: vec![c], m: 1 }], 1).unwrap();
    let an = ReturnMapAnalysis {
        fixed_point: vec![],
        period: 1.0,
        backward_newton: false,
        newton_iterations: 0,
        closure: 0.0,
        chain_sections: 1,
        dp: sp.product.clone(),
        dim: 1,
        c: sp.c,
        log_c: sp.log_c,
        log_abs_det: sp.log_abs_det,
        eigenvalues: vec![[c, 0.0]],
        log_moduli: sp.log_moduli.clone(),
        mean_divergence: 1e-12,
        integral_g: sp.log_c,
        integral_div: sp.log_c,
        residuals: StructureResiduals { det: 0.0, pairing: 0.0, symplectic: 0.0, kernel: 0.0, conformal: 0.0, divergence: 0.0, chain_closure: 0.0 },
        samples: vec![],
        unstable_directions: vec![],
        stable_directions: vec![],
    };
    let el = classify_orbit(&an, 1, 1e-6, 1e-6);
    assert!(!el.hyperbolic);
    assert_eq!(el.sign, 0);
}
