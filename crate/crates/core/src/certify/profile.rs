//! The collar profile (u, h₁) on [−1, 1] and the contact form u dt + h₁λ.
//!
//! u is the odd cubic step −(3s − s³)/2. h₁ = K·q with
//!
//! q(s) = 1 + c₂s² + c₃s³ + D·s²(1 − s²)²,
//!
//! where c₂, c₃ match the logarithmic slopes of the boundary germs of h, so
//! that h₁ equals each germ up to a positive constant. The D-term leaves
//! the germs untouched and only reshapes the interior. K scales h₁, which
//! is what makes the even-n flatness inequality attainable.

use crate::contact::ContactScene;
use crate::error::{Error, Result};
use crate::exterior::{Chart, KForm, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Value and slope of h at one end of the collar.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryGerm {
    pub value: f64,
    pub slope: f64,
}

/// Bounds of the (K, D) search.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileSweep {
    pub k_min: f64,
    pub k_max: f64,
    pub k_factor: f64,
    pub d_values: Vec<f64>,
    pub grid: usize,
}

impl Default for ProfileSweep {
    fn default() -> Self {
        ProfileSweep { k_min: 1.0, k_max: 1e8, k_factor: 2.0, d_values: vec![0.0, 0.25, -0.25, 0.5, -0.5, 1.0], grid: 1000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityProfile {
    pub n: usize,
    #[serde(serialize_with = "as_string")]
    pub u: ScalarField,
    #[serde(serialize_with = "as_string")]
    pub h1: ScalarField,
    pub k: f64,
    pub d: f64,
    pub c2: f64,
    pub c3: f64,
    /// h₁ = K∓·h near s = ∓1.
    pub k_minus: f64,
    pub k_plus: f64,
    pub h_minus: BoundaryGerm,
    pub h_plus: BoundaryGerm,
    pub grid: usize,
    /// Minimum over the grid of uⁿh₁′ − u′h₁ⁿ.
    pub grid_residuals: f64,
    /// Minimum over the grid of u·h₁′ − u′·h₁ (the sign of the volume density).
    pub density_min: f64,
    /// Minimum over the (0, 1] part of the grid of |u′||h₁/u|ⁿ − |h₁′| (even n).
    pub flatness_margin: Option<f64>,
}

fn as_string<S: serde::Serializer>(f: &ScalarField, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&f.to_string())
}

/// One row of the profile table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProfileRow {
    pub s: f64,
    pub u: f64,
    pub h1: f64,
    pub residual: f64,
}

pub fn midpoint_grid(k: usize) -> Vec<f64> {
    (0..k).map(|i| -1.0 + (i as f64 + 0.5) * 2.0 / k as f64).collect()
}

fn u_field() -> ScalarField {
    let s = ScalarField::coord(0);
    s.scale(3.0).sub(&s.powi(3)).scale(-0.5)
}

fn q_field(c2: f64, c3: f64, d: f64) -> ScalarField {
    let s = ScalarField::coord(0);
    let s2 = s.powi(2);
    let bump = s2.mul(&ScalarField::one().sub(&s2).powi(2));
    ScalarField::one().add(&s2.scale(c2)).add(&s.powi(3).scale(c3)).add(&bump.scale(d))
}

/// c₂, c₃ with q′/q = a at s = −1 and q′/q = −b at s = +1.
fn cubic_coefficients(a: f64, b: f64) -> Option<(f64, f64)> {
    // −(2+a)c₂ + (3+a)c₃ = a,  (2+b)c₂ + (3+b)c₃ = −b
    let (m11, m12, r1) = (-(2.0 + a), 3.0 + a, a);
    let (m21, m22, r2) = (2.0 + b, 3.0 + b, -b);
    let det = m11 * m22 - m12 * m21;
    if det.abs() < 1e-14 {
        return None;
    }
    Some(((r1 * m22 - m12 * r2) / det, (m11 * r2 - r1 * m21) / det))
}

struct Curves {
    s: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    q: Vec<f64>,
    dq: Vec<f64>,
}

fn curves(q: &ScalarField, grid: &[f64]) -> Curves {
    let uf = u_field();
    let du = uf.partial(0);
    let dq = q.partial(0);
    Curves {
        s: grid.to_vec(),
        u: grid.iter().map(|s| uf.eval(&[*s])).collect(),
        du: grid.iter().map(|s| du.eval(&[*s])).collect(),
        q: grid.iter().map(|s| q.eval(&[*s])).collect(),
        dq: grid.iter().map(|s| dq.eval(&[*s])).collect(),
    }
}

/// Shape constraints on q: positive, increasing before 0, decreasing after.
fn shape_violation(c: &Curves) -> Option<String> {
    for i in 0..c.s.len() {
        let s = c.s[i];
        if !(c.q[i] > 0.0) {
            return Some(format!("h1 > 0 fails at s = {s}"));
        }
        if s < 0.0 && !(c.dq[i] > 0.0) || s > 0.0 && !(c.dq[i] < 0.0) {
            return Some(format!("sign of h1' wrong at s = {s}"));
        }
    }
    None
}

fn flatness(c: &Curves, k: f64, n: usize) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..c.s.len() {
        if c.s[i] > 0.0 {
            let h = k * c.q[i];
            let rhs = c.du[i].abs() * (h / c.u[i]).abs().powi(n as i32);
            m = m.min(rhs - (k * c.dq[i]).abs());
        }
    }
    m
}

pub fn build_profile(h_minus: BoundaryGerm, h_plus: BoundaryGerm, n: usize, sweep: &ProfileSweep) -> Result<ConvexityProfile> {
    if n == 0 {
        return Err(Error::Invalid("n must be positive".into()));
    }
    if !(h_minus.value > 0.0 && h_plus.value > 0.0) {
        return Err(Error::Invalid("boundary germs must have h > 0".into()));
    }
    if !(h_minus.slope > 0.0) {
        return Err(Error::Invalid(format!("h'(-1) must be positive, got {}", h_minus.slope)));
    }
    if !(h_plus.slope < 0.0) {
        return Err(Error::Invalid(format!("h'(+1) must be negative, got {}", h_plus.slope)));
    }
    if !(sweep.k_min > 0.0 && sweep.k_max >= sweep.k_min && sweep.k_factor > 1.0 && sweep.grid >= 2) {
        return Err(Error::Invalid("bad profile sweep bounds".into()));
    }
    let a = h_minus.slope / h_minus.value;
    let b = -h_plus.slope / h_plus.value;
    let (c2, c3) = cubic_coefficients(a, b).ok_or_else(|| Error::Constructive("cubic germ match is singular".into()))?;
    let grid = midpoint_grid(sweep.grid);
    let mut last = String::from("no shape parameter tried");
    for &d in &sweep.d_values {
        let q = q_field(c2, c3, d);
        let c = curves(&q, &grid);
        if let Some(v) = shape_violation(&c) {
            last = format!("D = {d}: {v}");
            continue;
        }
        let mut k = sweep.k_min;
        loop {
            let flat = (n % 2 == 0).then(|| flatness(&c, k, n));
            if flat.map_or(true, |m| m > 0.0) {
                return Ok(finish(n, h_minus, h_plus, c2, c3, d, k, &q, &c, flat));
            }
            if k * sweep.k_factor > sweep.k_max {
                last = format!("D = {d}: flatness |h1'| < |u'||h1/u|^n still fails at K = {k}");
                break;
            }
            k *= sweep.k_factor;
        }
    }
    Err(Error::Constructive(last))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    n: usize,
    h_minus: BoundaryGerm,
    h_plus: BoundaryGerm,
    c2: f64,
    c3: f64,
    d: f64,
    k: f64,
    q: &ScalarField,
    c: &Curves,
    flat: Option<f64>,
) -> ConvexityProfile {
    let ni = n as i32;
    let mut written = f64::INFINITY;
    let mut dens = f64::INFINITY;
    for i in 0..c.s.len() {
        let (u, du, h, dh) = (c.u[i], c.du[i], k * c.q[i], k * c.dq[i]);
        written = written.min(u.powi(ni) * dh - du * h.powi(ni));
        dens = dens.min(u * dh - du * h);
    }
    let qm = q.eval(&[-1.0]);
    let qp = q.eval(&[1.0]);
    ConvexityProfile {
        n,
        u: u_field(),
        h1: q.scale(k),
        k,
        d,
        c2,
        c3,
        k_minus: k * qm / h_minus.value,
        k_plus: k * qp / h_plus.value,
        h_minus,
        h_plus,
        grid: c.s.len(),
        grid_residuals: written,
        density_min: dens,
        flatness_margin: flat,
    }
}

impl ConvexityProfile {
    /// The same profile with u replaced (used to exhibit failures).
    pub fn with_u(&self, u: ScalarField) -> Self {
        let mut p = self.clone();
        p.u = u;
        p
    }

    pub fn rows(&self) -> Vec<ProfileRow> {
        let du = self.u.partial(0);
        let dh = self.h1.partial(0);
        let ni = self.n as i32;
        midpoint_grid(self.grid)
            .into_iter()
            .map(|s| {
                let (u, h) = (self.u.eval(&[s]), self.h1.eval(&[s]));
                let r = u.powi(ni) * dh.eval(&[s]) - du.eval(&[s]) * h.powi(ni);
                ProfileRow { s, u, h1: h, residual: r }
            })
            .collect()
    }

    /// u(0) = 0 is the only sign change of u on the grid and u′(0) ≠ 0.
    pub fn dividing_set_simple(&self) -> bool {
        let g = midpoint_grid(self.grid);
        let changes = g.windows(2).filter(|w| self.u.eval(&[w[0]]).signum() != self.u.eval(&[w[1]]).signum()).count();
        changes == 1 && self.u.eval(&[0.0]).abs() < 1e-15 && self.u.partial(0).eval(&[0.0]).abs() > 0.0
    }
}

/// A (2n−1)-dimensional contact manifold Γ with form λ.
#[derive(Debug, Clone)]
pub struct GammaScene {
    pub name: String,
    pub chart: Arc<Chart>,
    pub lambda: KForm,
    /// Sampling box for the Γ coordinates.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl GammaScene {
    pub fn new(name: &str, chart: Arc<Chart>, coeffs: &[&str], lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let f = coeffs.iter().map(|s| chart.parse(s)).collect::<Result<Vec<_>>>()?;
        let lambda = KForm::one_form(chart.clone(), f)?;
        Ok(GammaScene { name: name.into(), chart, lambda, lower, upper })
    }

    pub fn circle() -> Self {
        let c = Arc::new(Chart::new(&[("phi", true)], &[]).unwrap());
        Self::new("S1", c, &["1"], vec![0.0], vec![std::f64::consts::TAU]).unwrap()
    }

    /// S³ in Hopf coordinates, λ = cos²η dξ₁ + sin²η dξ₂.
    pub fn standard_s3() -> Self {
        let c = Arc::new(Chart::new(&[("eta", false), ("xi1", true), ("xi2", true)], &[]).unwrap());
        let tau = std::f64::consts::TAU;
        Self::new("S3", c, &["0", "cos(eta)^2", "sin(eta)^2"], vec![0.05, 0.0, 0.0], vec![std::f64::consts::FRAC_PI_2 - 0.05, tau, tau])
            .unwrap()
    }

    /// T³ with λ = cos z dx + sin z dy.
    pub fn flat_t3() -> Self {
        let c = Arc::new(Chart::new(&[("x", true), ("y", true), ("z", true)], &[]).unwrap());
        let tau = std::f64::consts::TAU;
        Self::new("T3", c, &["cos(z)", "sin(z)", "0"], vec![0.0; 3], vec![tau; 3]).unwrap()
    }

    /// ℝ⁵ with λ = dz + x₁dy₁ + x₂dy₂.
    pub fn standard_r5() -> Self {
        let c = Arc::new(Chart::new(&[("x1", false), ("y1", false), ("x2", false), ("y2", false), ("z", false)], &[]).unwrap());
        Self::new("R5", c, &["0", "x1", "0", "x2", "1"], vec![-1.0; 5], vec![1.0; 5]).unwrap()
    }

    pub fn n(&self) -> usize {
        (self.chart.dim() + 1) / 2
    }

    /// Coefficient of λ∧(dλ)^{n−1} on the coordinate volume of Γ.
    pub fn density(&self, p: &[f64]) -> f64 {
        let l = self.lambda.eval_at(p);
        let dl = self.lambda.ext_d().eval_at(p);
        l.wedge(&dl.power(self.n() - 1)).c[0]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexFormReport {
    pub gamma: String,
    pub n: usize,
    pub samples: usize,
    /// Largest |direct − closed form| / max(|closed form|, tiny).
    pub max_relative_difference: f64,
    /// Same comparison against n(uⁿh₁′ − u′h₁ⁿ).
    pub written_form_difference: f64,
    /// Samples where α₁∧(dα₁)ⁿ does not have the sign of the Γ volume.
    pub positivity_failures: usize,
    pub failure_s: Vec<f64>,
    pub passed: bool,
    pub tolerance: f64,
}

/// Builds α₁ = u dt + h₁λ on ℝ_t × [−1, 1]_s × Γ and compares α₁∧(dα₁)ⁿ
/// with n(u·h₁^{n−1}h₁′ − u′h₁ⁿ)·dt∧ds∧λ∧(dλ)^{n−1} at random points.
pub fn verify_convex_form(profile: &ConvexityProfile, gamma: &GammaScene, samples: usize, seed: u64) -> Result<ConvexFormReport> {
    let n = profile.n;
    if gamma.n() != n || gamma.chart.dim() != 2 * n - 1 {
        return Err(Error::ChartMismatch(format!("Γ must have dimension {} for n = {n}", 2 * n - 1)));
    }
    let mut coords = vec![("t".to_string(), false), ("s".to_string(), false)];
    coords.extend(gamma.chart.coords.iter().map(|c| (c.name.clone(), c.angular)));
    let refs: Vec<(&str, bool)> = coords.iter().map(|(a, b)| (a.as_str(), *b)).collect();
    let chart = Arc::new(Chart::new(&refs, &[])?);
    let d = chart.dim();
    let shift: Vec<ScalarField> = (0..gamma.chart.dim()).map(|j| ScalarField::coord(j + 2)).collect();
    let on_s = [ScalarField::coord(1)];
    let u = profile.u.substitute(&on_s);
    let h = profile.h1.substitute(&on_s);
    let mut terms = vec![(vec![0usize], u)];
    for (t, c) in gamma.lambda.terms() {
        terms.push((vec![t[0] + 2], h.mul(&c.substitute(&shift))));
    }
    let alpha = KForm::from_terms(chart.clone(), 1, terms)?;
    let scene = ContactScene::new(alpha)?;
    let du = profile.u.partial(0);
    let dh = profile.h1.partial(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..samples)
        .map(|_| {
            let mut p = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            for (a, b) in gamma.lower.iter().zip(&gamma.upper) {
                p.push(rng.gen_range(*a..*b));
            }
            p
        })
        .collect();
    let ni = n as i32;
    let nf = n as f64;
    let rows: Vec<(f64, f64, f64, f64)> = pts
        .par_iter()
        .map(|p| {
            let direct = scene.contact_density(p);
            let s = p[1];
            let (uu, hh, du, dh) = (profile.u.eval(&[s]), profile.h1.eval(&[s]), du.eval(&[s]), dh.eval(&[s]));
            let g = gamma.density(&p[2..d]);
            let closed = nf * (uu * hh.powi(ni - 1) * dh - du * hh.powi(ni)) * g;
            let written = nf * (uu.powi(ni) * dh - du * hh.powi(ni)) * g;
            (direct, closed, written, g)
        })
        .collect();
    let mut rel = 0.0f64;
    let mut wrel = 0.0f64;
    let mut fails = 0;
    let mut fs = Vec::new();
    for (p, (direct, closed, written, g)) in pts.iter().zip(&rows) {
        let scale = closed.abs().max(1e-300);
        rel = rel.max((direct - closed).abs() / scale);
        wrel = wrel.max((direct - written).abs() / scale);
        if !(direct * g.signum() > 0.0) {
            fails += 1;
            fs.push(p[1]);
        }
    }
    let tol = 1e-8;
    Ok(ConvexFormReport {
        gamma: gamma.name.clone(),
        n,
        samples,
        max_relative_difference: rel,
        written_form_difference: wrel,
        positivity_failures: fails,
        failure_s: fs,
        passed: fails == 0 && rel < tol,
        tolerance: tol,
    })
}
