//! The `mori reproduce` and `mori perturb` analyses.

use super::column::{build_perturbed, ColumnModel, ColumnOracle, PerturbationSpec};
use super::lemma::{pushforward_zero, verify_foliation_lemma, LemmaReport, PushforwardZero};
use super::scene::{MoriConstants, MoriScene, ClosedFormVariant};
use super::torus::{degenerate_torus_probe, TorusReport};
use crate::certify::{certify_elements, find_elements, CertifyOptions, ElementSeeds, MorseSmaleCertificate, OrbitSeed, SampleRegion};
use crate::contact::Foliation;
use crate::certify::Verdict;
use crate::dynamics::{probe_recurrence, Check, CriticalElement, FieldSection, Flow, FlowOptions, Kind, OrbitOptions, RecurrenceProbe, RecurrenceReport, Stop};
use crate::error::Result;
use crate::numeric::NumericPolicy;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize)]
pub struct ReproduceDossier {
    pub n: usize,
    pub eps: f64,
    pub constants: MoriConstants,
    pub warnings: Vec<String>,
    pub lemma: LemmaReport,
    pub pushforward_zeros: Vec<PushforwardZero>,
    pub elements: Vec<CriticalElement>,
    pub zero_count: usize,
    pub orbit_count: usize,
    pub torus: TorusReport,
    pub certificate: MorseSmaleCertificate,
    pub seed_failures: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub notes: Vec<String>,
}

/// One point of a phase-portrait line in the (z, r) projection.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PortraitRow {
    pub line: usize,
    pub t: f64,
    pub z: f64,
    pub r: f64,
    pub rho: f64,
}

fn cart_seed(scene: &MoriScene, z: f64, x: f64, y: f64, u: f64, v: f64) -> Vec<f64> {
    let mut p = vec![z, x, y];
    for i in 0..scene.n - 1 {
        p.push(if i == 0 { u } else { u * 0.5 });
        p.push(if i == 0 { v } else { v * 0.5 });
    }
    p
}

/// Zero seeds near the axis plus a few generic points; orbit seeds near r = 1.
pub fn sigma0_seeds(scene: &MoriScene) -> ElementSeeds {
    let k = scene.constants;
    let mut zeros = Vec::new();
    for s in [1.0, -1.0] {
        zeros.push(cart_seed(scene, s * k.zero_z * 0.98, 0.01, -0.007, 0.002, 0.001));
    }
    for i in 0..6 {
        let a = i as f64 * 1.1;
        zeros.push(cart_seed(scene, 0.05 * a.cos(), 0.6 * a.sin(), 0.3, 0.02, -0.01));
    }
    let sec: Arc<dyn crate::dynamics::Section> = Arc::new(FieldSection::new(scene.cartesian.coord("y")));
    let orbits = [1.0, -1.0]
        .iter()
        .map(|s| OrbitSeed {
            seed: cart_seed(scene, s * k.orbit_z + 1e-3, 1.0, 0.0, 2e-3, 1e-3),
            section: sec.clone(),
            options: OrbitOptions::default(),
        })
        .collect();
    ElementSeeds { zeros, orbits, probes: vec![] }
}

pub fn sigma0_certify_options(scene: &MoriScene, seed: u64) -> CertifyOptions {
    let e = scene.eps;
    let mut lower = vec![-e, -1.0, -1.0];
    let mut upper = vec![e, 1.0, 1.0];
    for _ in 1..scene.n {
        lower.extend([-e, -e]);
        upper.extend([e, e]);
    }
    CertifyOptions { budget: 4, seed, horizon: 50.0, region: Some(SampleRegion { lower, upper }), ..CertifyOptions::default() }
}

pub fn reproduce(n: usize, eps: f64, policy: NumericPolicy, seed: u64) -> Result<(ReproduceDossier, Vec<PortraitRow>)> {
    let scene = MoriScene::new(n, eps)?;
    let lemma = verify_foliation_lemma(&scene, 200, seed, ClosedFormVariant::Corrected, None)?;
    let k = scene.constants;
    let mut pushforward_zeros = Vec::new();
    for s in [[0.0, k.r_star + 0.01, k.rho_star * 0.9], [k.orbit_z * 0.9, 0.999, 0.0], [-k.orbit_z * 0.9, 0.999, 0.0]] {
        if let Ok(z) = pushforward_zero(&scene, s, ClosedFormVariant::Corrected) {
            pushforward_zeros.push(z);
        }
    }
    let fol = scene.cartesian_foliation(policy)?;
    let seeds = sigma0_seeds(&scene);
    let (elements, seed_failures) = find_elements(&fol, &seeds);
    let torus = degenerate_torus_probe(&scene, policy)?;
    let opts = sigma0_certify_options(&scene, seed);
    let certificate = certify_elements(&fol, elements.clone(), vec![torus.recurrence.clone()], seed_failures.clone(), &opts)?;
    let portrait = portrait(&scene, &fol)?;
    let mut notes = scene.warnings.clone();
    notes.push("volume form: coordinate volume contracted with grad F; directions are compared up to positive factors".into());
    notes.push("non-convexity follows from the degenerate torus; the dividing-set argument is not reproduced".into());
    let checks = reproduce_checks(&k, &lemma, &elements, &torus, &certificate);
    let passed = checks.iter().all(|c| c.passed);
    Ok((
        ReproduceDossier {
            n,
            eps,
            constants: k,
            warnings: scene.warnings.clone(),
            lemma,
            pushforward_zeros,
            zero_count: elements.iter().filter(|e| e.kind == Kind::Zero).count(),
            orbit_count: elements.iter().filter(|e| e.kind == Kind::Orbit).count(),
            elements,
            torus,
            certificate,
            seed_failures,
            checks,
            passed,
            notes,
        },
        portrait,
    ))
}

fn reproduce_checks(
    k: &MoriConstants,
    lemma: &LemmaReport,
    elements: &[CriticalElement],
    torus: &TorusReport,
    cert: &MorseSmaleCertificate,
) -> Vec<Check> {
    let zeros: Vec<&CriticalElement> = elements.iter().filter(|e| e.kind == Kind::Zero).collect();
    let orbits: Vec<&CriticalElement> = elements.iter().filter(|e| e.kind == Kind::Orbit).collect();
    let z_err = |set: &[&CriticalElement], target: f64| {
        [target, -target]
            .iter()
            .map(|t| set.iter().map(|e| (e.location[0] - t).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0f64, f64::max)
    };
    let opposite = |set: &[&CriticalElement]| set.len() == 2 && set[0].sign * set[1].sign == -1;
    let positive_ok = elements.iter().filter(|e| e.sign > 0).all(|e| e.stable_index <= 2);
    let r_meas = torus.r_star_measured;
    vec![
        Check::below("foliation lemma angle", lemma.max_angle, lemma.tolerance),
        Check::flag("exactly two zeros", zeros.len() == 2),
        Check::below("zero location error", z_err(&zeros, k.zero_z), 1e-8),
        Check::flag("exactly two orbits", orbits.len() == 2),
        Check::below("orbit location error", z_err(&orbits, k.orbit_z), 1e-6),
        Check::flag("opposite signs among zeros", opposite(&zeros)),
        Check::flag("opposite signs among orbits", opposite(&orbits)),
        Check::flag("positive elements have stable_index <= 2", positive_ok),
        Check::flag("recurrence fired on the torus", torus.recurrence.fired),
        Check::below("torus radius error", (r_meas - k.r_star).abs(), 1e-6),
        Check::flag("certificate fails", cert.verdict == Verdict::Fail),
    ]
}

/// Flow lines of Σ₀ projected to (z, r, ρ).
fn portrait(scene: &MoriScene, fol: &Foliation) -> Result<Vec<PortraitRow>> {
    let k = scene.constants;
    let flow = Flow::new(fol).with_options(FlowOptions::from_policy(&fol.policy));
    let starts = [
        cart_seed(scene, k.zero_z * 0.9, 0.2, 0.0, 0.01, 0.0),
        cart_seed(scene, 0.05, 0.7, 0.0, 0.03, 0.0),
        cart_seed(scene, 0.0, k.r_star, 0.0, k.rho_star * 1.05, 0.0),
        cart_seed(scene, 0.0, k.r_star * 1.05, 0.0, k.rho_star * 0.6, 0.0),
        cart_seed(scene, -0.02, 0.95, 0.0, 0.02, 0.0),
        cart_seed(scene, 0.02, 0.4, 0.0, 0.05, 0.0),
    ];
    let mut rows = Vec::new();
    for (line, s) in starts.iter().enumerate() {
        let p = fol.surface.project(s, 1e-13, 40)?;
        let run = flow.run_state(flow.initial(&p), &Stop::time(20.0).recording())?;
        let step = (run.samples.len() / 400).max(1);
        for (t, q) in run.samples.iter().step_by(step) {
            let rho = q[3..].iter().map(|x| x * x).sum::<f64>().sqrt();
            rows.push(PortraitRow { line, t: *t, z: q[0], r: q[1].hypot(q[2]), rho });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusCheck {
    pub orbit: usize,
    pub phi: f64,
    pub measured: Vec<f64>,
    pub predicted: Vec<f64>,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbDossier {
    pub spec: PerturbationSpec,
    pub oracle: ColumnOracle,
    pub sup_norm: f64,
    pub c1_norm: f64,
    pub elements: Vec<CriticalElement>,
    pub hyperbolic_orbits: usize,
    pub moduli: Vec<ModulusCheck>,
    pub max_oracle_error: f64,
    /// Smallest |log|μ|| over all multipliers of the orbits.
    pub margin: f64,
    /// Distance in (x, y) of the orbits from the unperturbed saddle.
    pub saddle_shift: f64,
    pub recurrence: RecurrenceReport,
    pub certificate: MorseSmaleCertificate,
    pub seed_failures: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub notes: Vec<String>,
}

pub fn column_seeds(model: &ColumnModel) -> Result<ElementSeeds> {
    let sec: Arc<dyn crate::dynamics::Section> = Arc::new(FieldSection::new(model.chart.parse("sin(theta)")?));
    let orbits = model
        .orbit_seeds()
        .into_iter()
        .map(|s| OrbitSeed { seed: s, section: sec.clone(), options: OrbitOptions::default() })
        .collect();
    Ok(ElementSeeds { zeros: vec![model.point(0.0, 0.1, 0.1, 0.5), model.point(2.0, -0.2, 0.1, 2.0)], orbits, probes: vec![] })
}

pub fn column_certify_options(model: &ColumnModel, seed: u64, budget: usize) -> Result<CertifyOptions> {
    let w = model.spec.window;
    let tau = 2.0 * PI;
    Ok(CertifyOptions {
        budget,
        seed,
        horizon: 200.0,
        region: Some(SampleRegion { lower: vec![0.0, 0.0, -0.8 * w, -0.8 * w, 0.0], upper: vec![0.0, tau, 0.8 * w, 0.8 * w, tau] }),
        window: Some(model.chart.parse("x^2 + y^2 - w^2")?),
        ..CertifyOptions::default()
    })
}

pub fn column_probe(model: &ColumnModel, seed_phi: f64) -> Result<(RecurrenceProbe, FieldSection)> {
    let probe = RecurrenceProbe {
        constraints: vec![model.chart.parse("x")?, model.chart.parse("y")?],
        seed: model.point(0.0, 1e-3, -1e-3, seed_phi),
        iterations: 50,
        tube: 1e-2,
        t_max: 50.0,
        unit_band: 1e-3,
    };
    Ok((probe, FieldSection::new(model.chart.parse("sin(theta)")?)))
}

pub fn perturb(spec: PerturbationSpec, policy: NumericPolicy, seed: u64, budget: usize) -> Result<PerturbDossier> {
    let (model, fol) = build_perturbed(spec, policy)?;
    let seeds = column_seeds(&model)?;
    let (elements, seed_failures) = find_elements(&fol, &seeds);
    let (probe, sec) = column_probe(&model, 1.0)?;
    let recurrence = probe_recurrence(&fol, &sec, &probe)?;
    let opts = column_certify_options(&model, seed, budget)?;
    let certificate = certify_elements(&fol, elements.clone(), vec![recurrence.clone()], seed_failures.clone(), &opts)?;
    let o = model.oracle;
    let mut moduli = Vec::new();
    let mut worst = 0.0f64;
    let mut margin = f64::INFINITY;
    let mut shift = 0.0f64;
    let mut hyperbolic = 0;
    for (i, e) in elements.iter().enumerate().filter(|(_, e)| e.kind == Kind::Orbit) {
        if e.hyperbolic {
            hyperbolic += 1;
        }
        let phi = e.location[4].rem_euclid(2.0 * PI);
        let mut pred = if phi.cos() > 0.0 { vec![o.c_zero, o.x_zero, o.y_multiplier] } else { vec![o.c_pi, o.x_pi, o.y_multiplier] };
        let mut meas: Vec<f64> = e.eigenvalues.iter().map(|z| z[0].hypot(z[1])).collect();
        pred.sort_by(|a, b| a.partial_cmp(b).unwrap());
        meas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let err = pred.iter().zip(&meas).map(|(p, m)| (m - p).abs() / p).fold(0.0f64, f64::max);
        worst = worst.max(err);
        margin = margin.min(meas.iter().map(|m| m.ln().abs()).fold(f64::INFINITY, f64::min));
        shift = shift.max(e.location[2].hypot(e.location[3]));
        moduli.push(ModulusCheck { orbit: i, phi, measured: meas, predicted: pred, relative_error: err });
    }
    let mut notes = vec![
        format!("sup |H - kappa x y| = {:.6e}; sampled C^1 norm = {:.6e}", model.sup_norm, model.c1_norm),
        "column normal form instantiated directly as a model scene".into(),
    ];
    if spec.delta == 0.0 {
        notes.push("delta = 0: the torus is filled with closed leaves".into());
    }
    let mut checks = vec![Check::flag("exactly two hyperbolic orbits", hyperbolic == 2 && moduli.len() == 2)];
    if spec.delta > 0.0 {
        checks.push(Check::below("moduli vs 1-D oracle", worst, 1e-4));
        checks.push(Check::flag("restricted return map has no fixed point", !recurrence.fired));
    }
    checks.push(Check::flag("certificate passes", certificate.verdict == Verdict::Pass));
    let passed = checks.iter().all(|c| c.passed);
    Ok(PerturbDossier {
        spec,
        oracle: o,
        sup_norm: model.sup_norm,
        c1_norm: model.c1_norm,
        hyperbolic_orbits: hyperbolic,
        elements,
        moduli,
        max_oracle_error: worst,
        margin,
        saddle_shift: shift,
        recurrence,
        certificate,
        seed_failures,
        checks,
        passed,
        notes,
    })
}
