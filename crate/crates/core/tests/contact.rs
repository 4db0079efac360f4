use charfol::contact::*;
use charfol::exterior::{Chart, ScalarField};
use charfol::numeric::NumericPolicy;
use proptest::prelude::*;
use std::sync::Arc;

fn std3() -> (Arc<Chart>, Arc<ContactScene>) {
    let chart = Arc::new(Chart::new(&[("x", false), ("y", false), ("z", false)], &[]).unwrap());
    let scene = Arc::new(ContactScene::from_coefficients(chart.clone(), &["0", "x", "1"]).unwrap());
    (chart, scene)
}

fn plane() -> Foliation {
    let (chart, scene) = std3();
    let s = Hypersurface::level_set(chart.clone(), chart.coord("z"), 0.0).unwrap();
    Foliation::new(scene, Arc::new(s), NumericPolicy::default()).unwrap()
}

#[test]
fn plane_foliation_is_radial_in_x() {
    let fol = plane();
    let x = char_foliation_at(&fol, &[1.0, 0.3, 0.0]).unwrap();
    assert!((x[0] - 1.0).abs() < 1e-14 && x[1].abs() < 1e-14 && x[2].abs() < 1e-14, "{x:?}");
    let x0 = char_foliation_at(&fol, &[0.0, 0.0, 0.0]).unwrap();
    assert!(x0.iter().all(|v| *v == 0.0));
}

#[test]
fn off_surface_points_are_rejected() {
    let fol = plane();
    assert!(matches!(char_foliation_at(&fol, &[1.0, 0.0, 1e-3]), Err(charfol::Error::OffSurface { .. })));
}

#[test]
fn reeb_of_standard_form() {
    let (_, scene) = std3();
    for p in [[0.0, 0.0, 0.0], [1.5, -2.0, 0.3]] {
        let r = scene.reeb(&p).unwrap();
        assert!((r[2] - 1.0).abs() < 1e-14 && r[0].abs() < 1e-14 && r[1].abs() < 1e-14);
    }
}

#[test]
fn constant_hamiltonian_is_reeb() {
    let (_, scene) = std3();
    let one = ScalarField::constant(1.0);
    let zero = ScalarField::constant(0.0);
    let p = [0.7, -0.2, 1.1];
    let x = scene.hamiltonian(&one, &p).unwrap();
    let r = scene.reeb(&p).unwrap();
    for i in 0..3 {
        assert!((x[i] - r[i]).abs() < 1e-14);
    }
    assert!(scene.hamiltonian(&zero, &p).unwrap().iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn divergence_routes_agree_on_sphere() {
    let (chart, scene) = std3();
    let f = chart.parse("x^2 + y^2 + z^2").unwrap();
    let s = Hypersurface::level_set(chart, f, 1.0).unwrap();
    let fol = Foliation::new(scene, Arc::new(s), NumericPolicy::default()).unwrap();
    let p = [0.48, 0.6, 0.64];
    let a = fol.divergence(&p).unwrap();
    let b = fol.divergence_trace(&p).unwrap();
    assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{a} {b}");
}

#[test]
fn product_model_graph_check() {
    let chart = Arc::new(Chart::new(&[("t", false), ("theta", true), ("phi", true)], &[("delta", 0.05)]).unwrap());
    let scene = Arc::new(ContactScene::from_coefficients(chart.clone(), &["0", "t", "1"]).unwrap());
    let pol = NumericPolicy::default();
    let pts: Vec<Vec<f64>> = (0..200).map(|k| vec![0.0, 0.031 * k as f64, 0.173 * k as f64 + 0.1]).collect();
    for h in ["0", "0.3", "delta*sin(phi)"] {
        let h = chart.parse(h).unwrap();
        let r = graph_foliation_check(scene.clone(), 0, 1, &h, &pts, &pol).unwrap();
        assert!(r.passed(1e-8), "{r:?}");
    }
}

proptest! {
    #[test]
    fn conformal_rescaling_keeps_direction(x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let (chart, scene) = std3();
        let g = chart.parse("2 + sin(x*y) + z^2").unwrap();
        let scaled = Arc::new(scene.conformal(&g).unwrap());
        let f = chart.parse("x^2 + y^2 + z^2").unwrap();
        let s = Arc::new(Hypersurface::level_set(chart.clone(), f, 2.0).unwrap());
        let pol = NumericPolicy::default();
        let a = Foliation::new(scene, s.clone(), pol.clone()).unwrap();
        let b = Foliation::new(scaled, s.clone(), pol).unwrap();
        let p = s.project(&[x, y, 1.0], 1e-13, 30).unwrap();
        let xa = a.field(&p).unwrap();
        let xb = b.field(&p).unwrap();
        prop_assert!(angle_between(&xa, &xb) < 1e-8);
        prop_assert!(xa.iter().zip(&xb).map(|(u, v)| u * v).sum::<f64>() >= 0.0);
    }
}

mod common;

/// Scenes with a family of Hamiltonians to test X_H against.
fn hamiltonian_scenes() -> Vec<(Arc<ContactScene>, Vec<ScalarField>)> {
    let (c3, s3) = std3();
    let h3: Vec<ScalarField> = ["1", "x*y + sin(z)", "exp(0.2*x) - y^2*z"].iter().map(|h| c3.parse(h).unwrap()).collect();
    let c5 = Arc::new(Chart::new(&[("z", false), ("x1", false), ("y1", false), ("x2", false), ("y2", false)], &[]).unwrap());
    let s5 = Arc::new(ContactScene::from_coefficients(c5.clone(), &["1", "0", "x1", "0", "x2"]).unwrap());
    let h5 = ["1", "x1*y2 - cos(z*x2)", "y1^2 + 0.5*z"].iter().map(|h| c5.parse(h).unwrap()).collect();
    let g = c3.parse("2 + sin(x*y) + z^2").unwrap();
    let sc = Arc::new(s3.conformal(&g).unwrap());
    let mori = charfol::mori::MoriScene::new(2, 0.1).unwrap();
    let cm = mori.cartesian.clone();
    let names: Vec<String> = cm.coords.iter().map(|c| c.name.clone()).collect();
    let hm = vec![ScalarField::constant(1.0), cm.parse(&format!("{}*{} + {}", names[0], names[1], names[2])).unwrap()];
    vec![(s3, h3.clone()), (s5, h5), (sc, h3), (mori.cartesian_scene.clone(), hm)]
}

#[test]
fn hamiltonian_fields_solve_their_equations() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for (scene, hs) in hamiltonian_scenes() {
        let d = scene.dim();
        let mut worst = 0.0f64;
        for k in 0..100 {
            let p: Vec<f64> = common::random_point(&mut rng, d).iter().map(|v| 0.5 * v).collect();
            let h = &hs[k % hs.len()];
            let x = scene.hamiltonian(h, &p).unwrap();
            worst = worst.max(scene.hamiltonian_residual(h, &p, &x).unwrap());
        }
        assert!(worst < 1e-10, "dim {d}: {worst}");
    }
}

#[test]
fn unit_hamiltonian_is_reeb_everywhere() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(18);
    let one = ScalarField::constant(1.0);
    for (scene, _) in hamiltonian_scenes() {
        for _ in 0..100 {
            let p: Vec<f64> = common::random_point(&mut rng, scene.dim()).iter().map(|v| 0.5 * v).collect();
            let x = scene.hamiltonian(&one, &p).unwrap();
            let r = scene.reeb(&p).unwrap();
            let e = x.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
            assert!(e < 1e-12, "{e}");
        }
    }
}

/// For α = x dy + dz on (x, y, z) the defining equations give
/// X_H = (xH_z − H_y, H_x, H − xH_x). Derivatives by central differences.
#[test]
fn standard_hamiltonian_matches_hand_formula() {
    let (chart, scene) = std3();
    let src = "x*y + sin(z) + 0.3*x^2*z";
    let h = chart.parse(src).unwrap();
    let e = 1e-5;
    for k in 0..100 {
        let t = k as f64;
        let p = [(0.7 * t).sin(), (1.3 * t).cos(), 0.5 * (0.37 * t).sin()];
        let f = |q: [f64; 3]| h.eval(&q);
        let partial = |i: usize| {
            let (mut a, mut b) = (p, p);
            a[i] += e;
            b[i] -= e;
            (f(a) - f(b)) / (2.0 * e)
        };
        let (hx, hy, hz) = (partial(0), partial(1), partial(2));
        let want = [p[0] * hz - hy, hx, f(p) - p[0] * hx];
        let got = scene.hamiltonian(&h, &p).unwrap();
        for i in 0..3 {
            assert!((got[i] - want[i]).abs() < 1e-8, "{got:?} {want:?}");
        }
    }
}

#[test]
fn product_graph_over_five_dimensions() {
    let chart = Arc::new(
        Chart::new(&[("t", false), ("theta", true), ("z", false), ("x", false), ("y", false)], &[]).unwrap(),
    );
    let scene = Arc::new(ContactScene::from_coefficients(chart.clone(), &["0", "t", "1", "0", "x"]).unwrap());
    let h = chart.parse("0.4*(x^2 - y^2) + 0.1*sin(theta)*exp(-z^2)").unwrap();
    let pts: Vec<Vec<f64>> = (0..100)
        .map(|k| {
            let s = k as f64;
            vec![0.0, 0.063 * s, (0.41 * s).sin(), 0.8 * (0.77 * s).cos(), 0.8 * (1.9 * s).sin()]
        })
        .collect();
    let r = graph_foliation_check(scene, 0, 1, &h, &pts, &NumericPolicy::default()).unwrap();
    assert!(r.passed(1e-8), "{r:?}");
}
