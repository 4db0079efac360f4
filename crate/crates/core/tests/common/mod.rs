//! Oracles and generators shared by the integration tests. Nothing here
//! calls into the library's own closed forms.
#![allow(dead_code)]

use charfol::certify::ConvexityProfile;
use charfol::exterior::{Chart, KForm, ScalarField};
use rand::Rng;
use std::f64::consts::PI;
use std::sync::Arc;

/// Bisection for the r > 0 root of (r² − 1)² − ε(2r² − 1) on [1/2, 1], the
/// z-coefficient of the pushforward field at z = 0.
pub fn torus_radius_bisection(eps: f64) -> f64 {
    let f = |r: f64| (r * r - 1.0).powi(2) - eps * (2.0 * r * r - 1.0);
    let (mut a, mut b) = (0.5, 1.0);
    assert!(f(a) > 0.0 && f(b) < 0.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Bisection for the positive root of 1 − (z²/ε² − ε) = 0 on the axis.
pub fn axis_zero_bisection(eps: f64) -> f64 {
    let f = |z: f64| 1.0 - (z * z / (eps * eps) - eps);
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn psi(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// ∫ b over the support {cos θ < 0} by composite Simpson.
pub fn theta_bump_integral_simpson() -> f64 {
    let b = |t: f64| psi(-t.cos()) / psi(1.0);
    let (a, c) = (PI / 2.0, 3.0 * PI / 2.0);
    let n = 20000;
    let h = (c - a) / n as f64;
    let mut s = b(a) + b(c);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * b(a + i as f64 * h);
    }
    s * h / 3.0
}

/// A random smooth expression in the coordinates `x0..x{d-1}`.
pub fn random_expr<R: Rng>(rng: &mut R, d: usize) -> String {
    let mut terms = Vec::new();
    for _ in 0..rng.gen_range(2..5) {
        let c: f64 = rng.gen_range(-2.0..2.0);
        let i = rng.gen_range(0..d);
        let j = rng.gen_range(0..d);
        let t = match rng.gen_range(0..5) {
            0 => format!("{c:.6}*x{i}*x{j}"),
            1 => format!("{c:.6}*sin(x{i} + {:.3}*x{j})", rng.gen_range(-1.0..1.0)),
            2 => format!("{c:.6}*x{i}^2*cos(x{j})"),
            3 => format!("{c:.6}*exp(0.3*x{i})"),
            _ => format!("{c:.6}*x{i}"),
        };
        terms.push(t);
    }
    terms.push(format!("{:.6}", rng.gen_range(-1.0..1.0)));
    terms.join(" + ")
}

pub fn chart(d: usize) -> Arc<Chart> {
    let names: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    let spec: Vec<(&str, bool)> = names.iter().map(|n| (n.as_str(), false)).collect();
    Arc::new(Chart::new(&spec, &[]).unwrap())
}

/// A random k-form with every coefficient a random expression.
pub fn random_form<R: Rng>(rng: &mut R, chart: &Arc<Chart>, k: usize) -> KForm {
    let d = chart.dim();
    if k == 0 {
        return KForm::scalar(chart.clone(), chart.parse(&random_expr(rng, d)).unwrap());
    }
    let mut terms = Vec::new();
    for _ in 0..3 {
        let mut idx: Vec<usize> = Vec::new();
        while idx.len() < k {
            let i = rng.gen_range(0..d);
            if !idx.contains(&i) {
                idx.push(i);
            }
        }
        idx.sort();
        let f: ScalarField = chart.parse(&random_expr(rng, d)).unwrap();
        terms.push((idx, f));
    }
    KForm::from_terms(chart.clone(), k, terms).unwrap()
}

pub fn random_point<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExteriorResiduals {
    pub points: usize,
    pub dd: f64,
    pub anticommute: f64,
    pub leibniz: f64,
    pub round_trip: f64,
    pub double_contraction: f64,
}

/// The four exterior identities at `points` random points of ℝ^d, each with
/// freshly drawn forms.
pub fn exterior_residuals(d: usize, points: usize, seed: u64) -> ExteriorResiduals {
    use charfol::exterior::{solve_contraction, AltArray};
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let chart = chart(d);
    let mut r = ExteriorResiduals { points, ..Default::default() };
    for i in 0..points {
        let p = random_point(&mut rng, d);
        let k = i % (d - 1);
        let w = random_form(&mut rng, &chart, k);
        r.dd = r.dd.max(w.ext_d().ext_d().eval_at(&p).max_abs());

        let (pa, qb) = (1 + i % 2, 1 + (i / 2) % 2);
        let a = random_form(&mut rng, &chart, pa);
        let b = random_form(&mut rng, &chart, qb);
        let ab = a.wedge(&b).unwrap().eval_at(&p);
        let ba = b.wedge(&a).unwrap().eval_at(&p);
        let sign = if (pa * qb) % 2 == 0 { 1.0 } else { -1.0 };
        r.anticommute = r.anticommute.max(ab.sub(&ba.scale(sign)).max_abs() / (1.0 + ab.max_abs()));

        let lhs = a.wedge(&b).unwrap().ext_d().eval_at(&p);
        let t1 = a.ext_d().wedge(&b).unwrap().eval_at(&p);
        let t2 = a.wedge(&b.ext_d()).unwrap().eval_at(&p);
        let sa = if pa % 2 == 0 { 1.0 } else { -1.0 };
        let rhs = t1.add(&t2.scale(sa));
        r.leibniz = r.leibniz.max(lhs.sub(&rhs).max_abs() / (1.0 + lhs.max_abs().max(rhs.max_abs())));

        let v = random_point(&mut rng, d);
        let vol: f64 = rng.gen_range(0.5..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let omega = AltArray::top(d, vol);
        let eta = omega.interior(&v).unwrap();
        let back = solve_contraction(&omega, &eta, 1e12).unwrap();
        let e = v.iter().zip(&back).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max);
        let vn = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        r.round_trip = r.round_trip.max(e / vn);

        let c = random_form(&mut rng, &chart, 2 + i % (d - 2)).eval_at(&p);
        let ivv = c.interior(&v).unwrap().interior(&v).unwrap();
        r.double_contraction = r.double_contraction.max(ivv.max_abs() / (1.0 + c.max_abs()));
    }
    r
}

/// Minimum of uⁿh₁′ − u′h₁ⁿ over the 1000-point midpoint grid, and for
/// s > 0 the minimum of |u′|·|h₁/u|ⁿ − |h₁′|. Derivatives by central differences.
pub fn written_min(p: &ConvexityProfile) -> (f64, f64) {
    let n = p.n as i32;
    let h = 1e-6;
    let f = |g: &ScalarField, s: f64| g.eval(&[s]);
    let d = |g: &ScalarField, s: f64| (f(g, s + h) - f(g, s - h)) / (2.0 * h);
    let (mut w, mut flat) = (f64::INFINITY, f64::INFINITY);
    for i in 0..1000 {
        let s = -1.0 + (i as f64 + 0.5) * 2.0 / 1000.0;
        let (u, du, h1, dh1) = (f(&p.u, s), d(&p.u, s), f(&p.h1, s), d(&p.h1, s));
        w = w.min(u.powi(n) * dh1 - du * h1.powi(n));
        if s > 0.0 {
            flat = flat.min(du.abs() * (h1 / u).abs().powi(n) - dh1.abs());
        }
    }
    (w, flat)
}
