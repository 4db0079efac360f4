//! Invariances of the characteristic foliation and of its critical elements.

use charfol::certify::{check_morse_smale, find_elements, time_reversal_violations, CertifyOptions, ElementSeeds, SampleRegion, Verdict};
use charfol::contact::{angle_between, ContactScene, Foliation, Hypersurface};
use charfol::exterior::{Chart, ScalarField};
use charfol::mori::{self, MoriScene, PerturbationSpec};
use charfol::numeric::NumericPolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn sigma0() -> MoriScene {
    MoriScene::new(2, 0.1).unwrap()
}

/// Points of Σ₀ in Cartesian coordinates, away from the polar degeneracies.
fn sigma0_points(scene: &MoriScene, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k).map(|_| scene.to_cartesian(&scene.sample_polar_regular(&mut rng))).collect()
}

fn sphere() -> Foliation {
    let c = Arc::new(Chart::new(&[("z", false), ("x", false), ("y", false)], &[]).unwrap());
    let scene = Arc::new(ContactScene::from_coefficients(c.clone(), &["1", "0", "x"]).unwrap());
    let s = Hypersurface::level_set(c.clone(), c.parse("x^2 + y^2 + z^2").unwrap(), 1.0).unwrap();
    Foliation::new(scene, Arc::new(s), NumericPolicy::default()).unwrap()
}

fn sphere_points(fol: &Foliation, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            fol.surface.project(&p, 1e-14, 50).unwrap()
        })
        .collect()
}

fn cases() -> Vec<(Foliation, Vec<Vec<f64>>)> {
    let s = sigma0();
    let f0 = s.cartesian_foliation(NumericPolicy::default()).unwrap();
    let p0 = sigma0_points(&s, 120, 1);
    let fs = sphere();
    let ps = sphere_points(&fs, 120, 2);
    vec![(f0, p0), (fs, ps)]
}

#[test]
fn divergence_sign_ignores_the_volume_form() {
    for (fol, pts) in cases() {
        let names: Vec<String> = fol.surface.chart.coords.iter().map(|c| c.name.clone()).collect();
        let weights = [
            "2".to_string(),
            format!("1.5 + sin({}*{})", names[0], names[1]),
            format!("exp({}) + {}^2", names[2], names[0]),
        ];
        let mut checked = 0;
        for w in &weights {
            let wf = fol.surface.chart.parse(w).unwrap();
            let fw = fol.clone().with_weight(wf.clone());
            for p in &pts {
                let (d0, d1) = (fol.divergence(p).unwrap(), fw.divergence(p).unwrap());
                // div_{wΩ}(X/w) = div_Ω X / w.
                let wv = wf.eval(p);
                assert!((d1 * wv - d0).abs() < 1e-8 * (1.0 + d0.abs()), "{d0} {d1} {wv}");
                if d0.abs() > 1e-10 {
                    assert_eq!(d0.signum(), d1.signum());
                }
                assert!(angle_between(&fol.field(p).unwrap(), &fw.field(p).unwrap()) < 1e-9);
                checked += 1;
            }
        }
        assert!(checked >= 300);
    }
}

#[test]
fn conformal_rescaling_preserves_the_foliation() {
    for (fol, pts) in cases() {
        let chart = fol.surface.chart.clone();
        let names: Vec<String> = chart.coords.iter().map(|c| c.name.clone()).collect();
        let g: ScalarField = chart.parse(&format!("2 + sin({}) * cos({})", names[0], names[2])).unwrap();
        let scaled = Foliation::new(Arc::new(fol.scene.conformal(&g).unwrap()), fol.surface.clone(), fol.policy.clone()).unwrap();
        for p in &pts {
            let (a, b) = (fol.field(p).unwrap(), scaled.field(p).unwrap());
            assert!(angle_between(&a, &b) < 1e-8);
            assert!(a.iter().zip(&b).map(|(u, v)| u * v).sum::<f64>() > 0.0);
        }
    }
}

#[test]
fn conformal_rescaling_keeps_element_signs() {
    let fol = sphere();
    let chart = fol.surface.chart.clone();
    let g = chart.parse("3 + x*y + z").unwrap();
    let scaled = Foliation::new(Arc::new(fol.scene.conformal(&g).unwrap()), fol.surface.clone(), fol.policy.clone()).unwrap();
    let seeds = ElementSeeds { zeros: vec![vec![0.99, 0.05, 0.02], vec![-0.99, -0.03, 0.04]], ..Default::default() };
    let (a, _) = find_elements(&fol, &seeds);
    let (b, _) = find_elements(&scaled, &seeds);
    assert_eq!(a.len(), 2);
    for e in &a {
        let m = b.iter().find(|f| chart.distance(&f.location, &e.location) < 1e-8).unwrap();
        assert_eq!(m.sign, e.sign);
    }
}

#[test]
fn sigma0_is_invariant_under_angular_shifts() {
    let s = sigma0();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..150 {
        let p = s.sample_polar_regular(&mut rng);
        let shifts = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        worst = worst.max(mori::angular_shift_residual(&s, &p, &shifts).unwrap());
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn reversal_negates_field_and_divergence() {
    for (fol, pts) in cases() {
        let rev = fol.reversed();
        for p in &pts {
            let (a, b) = (fol.field(p).unwrap(), rev.field(p).unwrap());
            let e = a.iter().zip(&b).map(|(u, v)| (u + v).abs()).fold(0.0f64, f64::max);
            assert!(e < 1e-12 * (1.0 + charfol::numeric::linalg::norm(&a)));
            let (d0, d1) = (fol.divergence(p).unwrap(), rev.divergence(p).unwrap());
            assert!((d0 + d1).abs() < 1e-9 * (1.0 + d0.abs()));
        }
    }
}

#[test]
fn reversal_swaps_element_signs() {
    let fol = sphere();
    let seeds = ElementSeeds { zeros: vec![vec![0.99, 0.05, 0.02], vec![-0.99, -0.03, 0.04]], ..Default::default() };
    let opts = CertifyOptions {
        budget: 8,
        horizon: 100.0,
        region: Some(SampleRegion { lower: vec![-1.0; 3], upper: vec![1.0; 3] }),
        ..CertifyOptions::default()
    };
    let a = check_morse_smale(&fol, &seeds, &opts).unwrap();
    let b = check_morse_smale(&fol.reversed(), &seeds, &opts).unwrap();
    assert_eq!((a.verdict, b.verdict), (Verdict::Pass, Verdict::Pass));
    assert_eq!(time_reversal_violations(&fol.surface.chart, &a.elements, &b.elements), 0);

    let s = sigma0();
    let f0 = s.cartesian_foliation(NumericPolicy::default()).unwrap();
    let seeds = mori::dossier::sigma0_seeds(&s);
    let (a, _) = find_elements(&f0, &seeds);
    let (b, _) = find_elements(&f0.reversed(), &seeds);
    assert_eq!(a.len(), 4);
    assert_eq!(time_reversal_violations(&f0.surface.chart, &a, &b), 0);

    let (model, fc) = mori::build_perturbed(PerturbationSpec::default(), NumericPolicy::default()).unwrap();
    let seeds = mori::dossier::column_seeds(&model).unwrap();
    let (a, _) = find_elements(&fc, &seeds);
    let (b, _) = find_elements(&fc.reversed(), &seeds);
    assert!(a.len() >= 2);
    assert_eq!(time_reversal_violations(&fc.surface.chart, &a, &b), 0);
}
