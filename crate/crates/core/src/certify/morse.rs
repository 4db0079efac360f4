//! Morse-Smale certificates.
//!
//! Conditions checked: every critical element found from the seeds is
//! hyperbolic; sampled flow lines converge to an element (or leave the
//! declared window) in both time directions; no flow line runs from a
//! negative element to a positive one. Transversality of invariant
//! manifolds is not established and is reported as such.

use crate::contact::Foliation;
use crate::dynamics::{
    classify_orbit, find_orbit, find_zeros, linearize_zero, probe_recurrence, CriticalElement, Flow, FlowOptions, Kind,
    OrbitOptions, Outcome, RecurrenceProbe, RecurrenceReport, Section, Stop,
};
use crate::error::Result;
use crate::exterior::{Chart, ScalarField, Tape};
use crate::numeric::linalg;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

pub struct OrbitSeed {
    pub seed: Vec<f64>,
    pub section: Arc<dyn Section>,
    pub options: OrbitOptions,
}

pub struct ProbeSeed {
    pub probe: RecurrenceProbe,
    pub section: Arc<dyn Section>,
}

#[derive(Default)]
pub struct ElementSeeds {
    pub zeros: Vec<Vec<f64>>,
    pub orbits: Vec<OrbitSeed>,
    pub probes: Vec<ProbeSeed>,
}

/// Box from which flow-line seeds are drawn (then projected onto Σ).
#[derive(Debug, Clone, Serialize)]
pub struct SampleRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub budget: usize,
    pub seed: u64,
    /// Time bound for each sampled line and each connection seed.
    pub horizon: f64,
    /// A line within this distance of an element has converged to it.
    pub capture: f64,
    /// Offset of unstable-manifold seeds along the unstable directions.
    pub offset: f64,
    /// Approach distance that counts as a connection.
    pub approach: f64,
    pub region: Option<SampleRegion>,
    /// Lines with window(p) ≥ 0 have left the chart.
    pub window: Option<ScalarField>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            budget: 16,
            seed: 0,
            horizon: 200.0,
            capture: 1e-3,
            offset: 1e-4,
            approach: 1e-3,
            region: None,
            window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitCheck {
    pub sampled: usize,
    /// Lines resolved in both time directions, over `sampled`.
    pub fraction: f64,
    pub forward_captured: usize,
    pub backward_captured: usize,
    pub boundary_exits: usize,
    pub unresolved: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Connection {
    pub from: usize,
    pub to: usize,
    pub seed: Vec<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionCount {
    pub negative: usize,
    pub positive: usize,
    /// dim Wᵘ(negative) + dim Wˢ(positive) − dim Σ.
    pub expected_intersection: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MorseSmaleCertificate {
    pub verdict: Verdict,
    pub reasons: Vec<String>,
    pub orientation: String,
    pub time_reversed: bool,
    /// The certificate covers a chart with a boundary window.
    pub local: bool,
    pub elements: Vec<CriticalElement>,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
    pub all_hyperbolic: bool,
    pub limit_check: LimitCheck,
    pub connection_seeds: usize,
    pub connection_violations: Vec<Connection>,
    pub dimension_counts: Vec<DimensionCount>,
    pub transversality: String,
    pub recurrence: Vec<RecurrenceReport>,
    pub seed_failures: Vec<String>,
}

/// Zeros and orbits refined from the seeds, deduplicated, in seed order.
pub fn find_elements(fol: &Foliation, seeds: &ElementSeeds) -> (Vec<CriticalElement>, Vec<String>) {
    let pol = fol.policy;
    let chart = &fol.surface.chart;
    let mut out: Vec<CriticalElement> = Vec::new();
    let mut failures = Vec::new();
    let zs = find_zeros(fol, &seeds.zeros);
    for z in &zs.zeros {
        match linearize_zero(fol, z) {
            Ok(e) => out.push(e),
            Err(e) => failures.push(format!("zero at {z:?}: {e}")),
        }
    }
    if !zs.dropped.is_empty() {
        failures.push(format!("{} zero seeds did not converge", zs.dropped.len()));
    }
    let orbits: Vec<Result<CriticalElement>> = seeds
        .orbits
        .par_iter()
        .map(|s| {
            let an = find_orbit(fol, s.section.as_ref(), &s.seed, &s.options)?;
            Ok(classify_orbit(&an, fol.n(), pol.hyperbolicity_band, pol.structure_check))
        })
        .collect();
    for (s, r) in seeds.orbits.iter().zip(orbits) {
        match r {
            Ok(e) => {
                let dup = out.iter().any(|o| o.kind == Kind::Orbit && o.distance(chart, &e.location) < 1e-5);
                if !dup {
                    out.push(e);
                }
            }
            Err(e) => failures.push(format!("orbit seed {:?}: {e}", s.seed)),
        }
    }
    (out, failures)
}

struct Target {
    polyline: Vec<Vec<f64>>,
}

impl Target {
    fn from(e: &CriticalElement) -> Self {
        let s = &e.samples;
        let step = (s.len() / 256).max(1);
        let mut polyline: Vec<Vec<f64>> = s.iter().step_by(step).cloned().collect();
        if polyline.is_empty() {
            polyline.push(e.location.clone());
        }
        if e.kind == Kind::Orbit {
            polyline.push(e.location.clone());
        }
        Target { polyline }
    }

    fn distance(&self, chart: &Chart, p: &[f64]) -> f64 {
        if self.polyline.len() == 1 {
            return chart.distance(&self.polyline[0], p);
        }
        let mut best = f64::INFINITY;
        for w in self.polyline.windows(2) {
            best = best.min(seg(chart, &w[0], &w[1], p));
        }
        best
    }
}

fn seg(chart: &Chart, a: &[f64], b: &[f64], p: &[f64]) -> f64 {
    let ab = chart.delta(a, b);
    let ap = chart.delta(a, p);
    let l2 = linalg::dot(&ab, &ab);
    let t = if l2 > 0.0 { (linalg::dot(&ap, &ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    ap.iter().zip(&ab).map(|(x, y)| (x - t * y).powi(2)).sum::<f64>().sqrt()
}

enum LineEnd {
    Captured(usize),
    Exit,
    Unresolved,
}

#[allow(clippy::too_many_arguments)]
fn follow(
    fol: &Foliation,
    targets: &[Target],
    window: Option<&Tape>,
    p: &[f64],
    backward: bool,
    horizon: f64,
    radius: f64,
    watch: &[usize],
    origin: Option<usize>,
) -> Result<(LineEnd, f64, Option<usize>)> {
    let chart = &fol.surface.chart;
    let flow = Flow::new(fol).with_options(FlowOptions::from_policy(&fol.policy)).backward(backward);
    let inside = |q: &[f64]| window.map_or(true, |w| w.eval(q)[0] < 0.0);
    // closest approach to the watched elements
    let closest = std::sync::Mutex::new((f64::INFINITY, None::<usize>));
    // the element a line starts from only captures it once it has moved away
    let armed = std::sync::atomic::AtomicBool::new(origin.is_none());
    let monitor = |_t: f64, q: &[f64]| -> bool {
        let mut c = closest.lock().unwrap();
        for &k in watch {
            let d = targets[k].distance(chart, q);
            if d < c.0 {
                *c = (d, Some(k));
            }
        }
        if let Some(o) = origin {
            if targets[o].distance(chart, q) > 10.0 * radius {
                armed.store(true, std::sync::atomic::Ordering::Relaxed);
            }
        }
        let armed = armed.load(std::sync::atomic::Ordering::Relaxed);
        targets.iter().enumerate().any(|(k, t)| (armed || Some(k) != origin) && t.distance(chart, q) < radius)
    };
    let stop = Stop { window: Some(&inside), monitor: Some(&monitor), ..Stop::time(horizon) };
    let run = flow.run_state(flow.initial(p), &stop)?;
    let (dmin, which) = *closest.lock().unwrap();
    let end = match run.outcome {
        Outcome::Monitor => {
            let q = run.point();
            let k = (0..targets.len())
                .min_by(|&a, &b| targets[a].distance(chart, q).partial_cmp(&targets[b].distance(chart, q)).unwrap())
                .unwrap();
            LineEnd::Captured(k)
        }
        Outcome::LeftWindow => LineEnd::Exit,
        _ => LineEnd::Unresolved,
    };
    Ok((end, dmin, which))
}

fn sample_points(fol: &Foliation, opts: &CertifyOptions, window: Option<&Tape>) -> Vec<Vec<f64>> {
    let Some(reg) = &opts.region else { return vec![] };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < opts.budget && tries < 1000 * opts.budget.max(1) {
        tries += 1;
        let p: Vec<f64> = reg.lower.iter().zip(&reg.upper).map(|(a, b)| if b > a { rng.gen_range(*a..*b) } else { *a }).collect();
        let Ok(q) = fol.surface.project(&p, fol.policy.projection_tol, fol.policy.projection_max_iter) else { continue };
        if window.map_or(false, |w| w.eval(&q)[0] >= 0.0) {
            continue;
        }
        if fol.field(&q).is_err() {
            continue;
        }
        out.push(q);
    }
    out
}

/// Seeds p ± offset·v along each unstable direction (and their pairwise sums).
fn unstable_seeds(fol: &Foliation, e: &CriticalElement, offset: f64) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    let u = &e.unstable_directions;
    for v in u {
        dirs.push(v.clone());
    }
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            dirs.push(u[i].iter().zip(&u[j]).map(|(a, b)| (a + b) / 2f64.sqrt()).collect());
            dirs.push(u[i].iter().zip(&u[j]).map(|(a, b)| (a - b) / 2f64.sqrt()).collect());
        }
    }
    let mut out = Vec::new();
    for v in dirs {
        let vn = linalg::norm(&v);
        if vn == 0.0 {
            continue;
        }
        for s in [1.0, -1.0] {
            let p: Vec<f64> = e.location.iter().zip(&v).map(|(x, d)| x + s * offset * d / vn).collect();
            if let Ok(q) = fol.surface.project(&p, fol.policy.projection_tol, fol.policy.projection_max_iter) {
                out.push(q);
            }
        }
    }
    out
}

pub fn check_morse_smale(fol: &Foliation, seeds: &ElementSeeds, opts: &CertifyOptions) -> Result<MorseSmaleCertificate> {
    let (elements, seed_failures) = find_elements(fol, seeds);
    let mut recurrence = Vec::new();
    for p in &seeds.probes {
        recurrence.push(probe_recurrence(fol, p.section.as_ref(), &p.probe)?);
    }
    certify_elements(fol, elements, recurrence, seed_failures, opts)
}

/// The certificate for a given list of elements and probe reports.
pub fn certify_elements(
    fol: &Foliation,
    elements: Vec<CriticalElement>,
    recurrence: Vec<RecurrenceReport>,
    seed_failures: Vec<String>,
    opts: &CertifyOptions,
) -> Result<MorseSmaleCertificate> {
    let chart = &fol.surface.chart;
    let window = opts.window.as_ref().map(|w| Tape::new(std::slice::from_ref(w)));
    let positive: Vec<usize> = (0..elements.len()).filter(|&i| elements[i].sign > 0).collect();
    let negative: Vec<usize> = (0..elements.len()).filter(|&i| elements[i].sign < 0).collect();
    let all_hyperbolic = elements.iter().all(|e| e.hyperbolic);
    let targets: Vec<Target> = elements.iter().map(Target::from).collect();

    // limit behaviour of sampled lines
    let pts = sample_points(fol, opts, window.as_ref());
    let lines: Vec<Result<[(LineEnd, f64, Option<usize>); 2]>> = pts
        .par_iter()
        .map(|p| {
            let f = follow(fol, &targets, window.as_ref(), p, false, opts.horizon, opts.capture, &[], None)?;
            let b = follow(fol, &targets, window.as_ref(), p, true, opts.horizon, opts.capture, &[], None)?;
            Ok([f, b])
        })
        .collect();
    let mut lc = LimitCheck { sampled: pts.len(), fraction: 1.0, forward_captured: 0, backward_captured: 0, boundary_exits: 0, unresolved: vec![] };
    let mut resolved = 0;
    for (p, r) in pts.iter().zip(lines) {
        let mut ok = true;
        match r {
            Ok(ends) => {
                for (k, (end, _, _)) in ends.iter().enumerate() {
                    match end {
                        LineEnd::Captured(_) if k == 0 => lc.forward_captured += 1,
                        LineEnd::Captured(_) => lc.backward_captured += 1,
                        LineEnd::Exit => lc.boundary_exits += 1,
                        LineEnd::Unresolved => ok = false,
                    }
                }
            }
            Err(_) => ok = false,
        }
        if ok {
            resolved += 1;
        } else {
            lc.unresolved.push(p.clone());
        }
    }
    if !pts.is_empty() {
        lc.fraction = resolved as f64 / pts.len() as f64;
    }

    // negative → positive connections
    let mut conn_seeds = 0;
    let mut violations = Vec::new();
    if !positive.is_empty() {
        let jobs: Vec<(usize, Vec<f64>)> =
            negative.iter().flat_map(|&i| unstable_seeds(fol, &elements[i], opts.offset).into_iter().map(move |s| (i, s))).collect();
        conn_seeds = jobs.len();
        let res: Vec<Result<(LineEnd, f64, Option<usize>)>> = jobs
            .par_iter()
            .map(|(i, s)| follow(fol, &targets, window.as_ref(), s, false, opts.horizon, opts.capture, &positive, Some(*i)))
            .collect();
        for ((i, s), r) in jobs.iter().zip(res) {
            if let Ok((end, dmin, which)) = r {
                let hit = match end {
                    LineEnd::Captured(k) => positive.contains(&k).then(|| (k, targets[k].distance(chart, s).min(dmin))),
                    _ => None,
                };
                let near = which.filter(|_| dmin < opts.approach).map(|k| (k, dmin));
                if let Some((to, distance)) = hit.or(near) {
                    violations.push(Connection { from: *i, to, seed: s.clone(), distance });
                }
            }
        }
    }

    let dim = 2 * fol.n();
    let mut dimension_counts = Vec::new();
    for &i in &negative {
        for &j in &positive {
            let wu = elements[i].unstable_index as i64;
            let ws = elements[j].stable_index as i64;
            dimension_counts.push(DimensionCount { negative: i, positive: j, expected_intersection: wu + ws - dim as i64 });
        }
    }

    let mut reasons = Vec::new();
    let fired: Vec<&RecurrenceReport> = recurrence.iter().filter(|r| r.fired).collect();
    for r in &fired {
        reasons.push(format!(
            "non-hyperbolic recurrent set near {:?}: return iterates stay within {:e} of the level set, restricted multiplier {:.12}",
            r.refined_point, r.max_deviation, r.restricted_multiplier
        ));
    }
    for (i, e) in elements.iter().enumerate() {
        if !e.hyperbolic {
            reasons.push(format!("element {i} ({:?}) is not hyperbolic (margin {:e})", e.kind, e.margin));
        }
        if e.sign == 0 {
            reasons.push(format!("element {i} has no Liouville sign"));
        }
        for c in e.checks.iter().filter(|c| !c.passed) {
            reasons.push(format!("element {i}: check `{}` failed ({:e} ≥ {:e})", c.name, c.value, c.tolerance));
        }
    }
    for v in &violations {
        reasons.push(format!("flow line from negative element {} approaches positive element {} to {:e}", v.from, v.to, v.distance));
    }
    let failed = !fired.is_empty() || !all_hyperbolic || !violations.is_empty() || elements.iter().any(|e| e.sign == 0 || !e.checks_passed());
    let verdict = if failed {
        Verdict::Fail
    } else if lc.fraction < 1.0 || pts.is_empty() && opts.budget > 0 && opts.region.is_some() {
        reasons.push(format!("{} sampled lines did not resolve within the horizon", lc.unresolved.len()));
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    if verdict == Verdict::Pass && !seed_failures.is_empty() {
        reasons.push("some seeds did not converge; they are listed under seed_failures".into());
    }
    Ok(MorseSmaleCertificate {
        verdict,
        reasons,
        orientation: fol.surface.orientation.describe().to_string(),
        time_reversed: fol.surface.orientation.sign < 0,
        local: opts.window.is_some(),
        elements,
        positive,
        negative,
        all_hyperbolic,
        limit_check: lc,
        connection_seeds: conn_seeds,
        connection_violations: violations,
        dimension_counts,
        transversality: "not verified".into(),
        recurrence,
        seed_failures,
    })
}

/// Compares a certificate with the one computed for the reversed field:
/// elements are matched by location and must have opposite signs and
/// swapped indices. Returns the number of mismatches.
pub fn time_reversal_violations(chart: &Chart, fwd: &[CriticalElement], rev: &[CriticalElement]) -> usize {
    let mut bad = 0;
    for e in fwd {
        let m = rev
            .iter()
            .filter(|r| r.kind == e.kind)
            .min_by(|a, b| chart.distance(&a.location, &e.location).partial_cmp(&chart.distance(&b.location, &e.location)).unwrap());
        let ok = m.is_some_and(|r| {
            let close = r.kind == Kind::Zero && chart.distance(&r.location, &e.location) < 1e-6
                || r.kind == Kind::Orbit && e.distance(chart, &r.location) < 1e-4;
            close && r.sign == -e.sign && r.stable_index == e.unstable_index && r.unstable_index == e.stable_index
        });
        if !ok {
            bad += 1;
        }
    }
    bad + fwd.len().abs_diff(rev.len())
}
