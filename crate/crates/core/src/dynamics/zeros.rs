//! Zeros of the foliation field and their linearization.

use super::element::{sign_of, Check, CriticalElement, Kind};
use crate::contact::Foliation;
use crate::error::{Error, Result};
use crate::numeric::{linalg, Dual};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct ZeroSearch {
    pub zeros: Vec<Vec<f64>>,
    /// Seeds whose Newton iteration did not converge.
    pub dropped: Vec<Vec<f64>>,
}

/// Levenberg–Marquardt on (X(p), F(p) − c) = 0 from one seed.
pub fn refine_zero(fol: &Foliation, seed: &[f64]) -> Result<Vec<f64>> {
    let d = fol.dim();
    let pol = &fol.policy;
    let mut p = fol.surface.project(seed, pol.projection_tol, pol.projection_max_iter)?;
    let mut mu = 1e-6;
    let residual = |p: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let (x, dx) = fol.jet(p)?;
        let (f, g) = fol.surface.value_grad(&Dual::seed(p));
        let mut r = x;
        r.push(f.v);
        let mut j = dx;
        j.extend(g.iter().map(|v| v.v));
        Ok((r, j))
    };
    let (mut r, mut j) = residual(&p)?;
    let mut cost = linalg::dot(&r, &r);
    for _ in 0..pol.newton_max_iter * 2 {
        let xn = linalg::norm(&r[..d]);
        if xn < pol.zero_residual * 1e-1 && r[d].abs() < pol.projection_tol * 10.0 {
            break;
        }
        let rows = d + 1;
        // normal equations (JᵀJ + μ diag) δ = −Jᵀ r
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        for i in 0..d {
            for k in 0..d {
                a[i * d + k] = (0..rows).map(|q| j[q * d + i] * j[q * d + k]).sum();
            }
            b[i] = -(0..rows).map(|q| j[q * d + i] * r[q]).sum::<f64>();
        }
        let scale = (0..d).map(|i| a[i * d + i]).fold(0.0f64, f64::max).max(1e-300);
        let mut accepted = false;
        for _ in 0..12 {
            let mut am = a.clone();
            for i in 0..d {
                am[i * d + i] += mu * scale;
            }
            let Ok(delta) = linalg::solve(am, d, &b) else {
                mu *= 10.0;
                continue;
            };
            let cand: Vec<f64> = p.iter().zip(&delta).map(|(x, dx)| x + dx).collect();
            if let Ok((rn, jn)) = residual(&cand) {
                let cn = linalg::dot(&rn, &rn);
                if cn < cost {
                    p = cand;
                    r = rn;
                    j = jn;
                    cost = cn;
                    mu = (mu * 0.1).max(1e-15);
                    accepted = true;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    let p = fol.surface.project(&p, pol.projection_tol, pol.projection_max_iter)?;
    let xn = linalg::norm(&fol.field(&p)?);
    if xn < pol.zero_residual {
        Ok(p)
    } else {
        Err(Error::NoOrbit(format!("zero search stalled with |X| = {xn:e}")))
    }
}

/// Refines every seed in parallel and deduplicates (seed order is kept).
pub fn find_zeros(fol: &Foliation, seeds: &[Vec<f64>]) -> ZeroSearch {
    let results: Vec<Result<Vec<f64>>> = seeds.par_iter().map(|s| refine_zero(fol, s)).collect();
    let chart = &fol.surface.chart;
    let mut zeros: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    for (s, r) in seeds.iter().zip(results) {
        match r {
            Ok(z) => {
                if !zeros.iter().any(|q| chart.distance(q, &z) < fol.policy.dedupe_radius) {
                    zeros.push(z);
                }
            }
            Err(_) => dropped.push(s.clone()),
        }
    }
    ZeroSearch { zeros, dropped }
}

/// Jacobian of X restricted to TΣ in an orthonormal tangent basis B,
/// J = Bᵀ DX B, together with B.
pub fn tangent_jacobian(fol: &Foliation, p: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let d = fol.dim();
    let (_, dx) = fol.jet(p)?;
    let (_, g) = fol.surface.value_grad(p);
    let b = linalg::complement_basis(&[g], d);
    let m = b.len();
    let mut j = vec![0.0; m * m];
    for (c, bc) in b.iter().enumerate() {
        let img = linalg::matmul(&dx, bc, d, d, 1);
        for (r, br) in b.iter().enumerate() {
            j[r * m + c] = linalg::dot(br, &img);
        }
    }
    Ok((j, b))
}

/// Eigen-data, Liouville sign and indices of a zero.
pub fn linearize_zero(fol: &Foliation, p: &[f64]) -> Result<CriticalElement> {
    let pol = &fol.policy;
    let x = fol.field(p)?;
    let xn = linalg::norm(&x);
    if xn >= pol.zero_residual {
        return Err(Error::Invalid(format!("not a zero: |X| = {xn:e}")));
    }
    let (j, b) = tangent_jacobian(fol, p)?;
    let m = b.len();
    let ev = linalg::eigenvalues(&j, m);
    let margin = ev.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    let stable = ev.iter().filter(|z| z.re < 0.0).count();
    let unstable = ev.iter().filter(|z| z.re > 0.0).count();
    let div = fol.divergence(p)?;
    let trace: f64 = (0..m).map(|i| j[i * m + i]).sum();
    let sign = sign_of(div, pol.divergence_floor);
    let n = fol.n();
    let mut checks = vec![
        Check::below("|X|", xn, pol.zero_residual),
        Check::below("divergence vs trace", (div - trace).abs() / (1.0 + div.abs()), pol.identity_check.max(1e-8)),
    ];
    let mut notes = Vec::new();
    if sign == 0 {
        notes.push("divergence vanishes: not a Liouville zero".into());
    }
    if sign > 0 {
        checks.push(Check::flag("stable_index <= n", stable <= n));
    }
    if sign < 0 {
        checks.push(Check::flag("unstable_index <= n", unstable <= n));
    }
    let hyperbolic = margin > pol.zero_axis_band;
    if !hyperbolic {
        notes.push("eigenvalue on the imaginary axis".into());
    }
    let to_ambient = |vs: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        vs.into_iter()
            .map(|c| {
                let mut v = vec![0.0; fol.dim()];
                for (k, bk) in b.iter().enumerate() {
                    for i in 0..v.len() {
                        v[i] += c[k] * bk[i];
                    }
                }
                v
            })
            .collect()
    };
    let (unstable_directions, stable_directions) = if hyperbolic {
        // exp(±J/s) separates the half-planes; s keeps it finite
        let s = ev.iter().map(|z| z.norm()).fold(1.0f64, f64::max) / 4.0;
        let pos: Vec<f64> = j.iter().map(|v| v / s).collect();
        let neg: Vec<f64> = j.iter().map(|v| -v / s).collect();
        let it = (200.0 * s / margin).clamp(60.0, 4000.0) as usize;
        let e = linalg::expm(&pos, m);
        let ei = linalg::expm(&neg, m);
        (to_ambient(linalg::dominant_subspace(&e, m, unstable, it)), to_ambient(linalg::dominant_subspace(&ei, m, stable, it)))
    } else {
        (vec![], vec![])
    };
    Ok(CriticalElement {
        kind: Kind::Zero,
        location: p.to_vec(),
        period: None,
        eigenvalues: ev.iter().map(|z| [z.re, z.im]).collect(),
        hyperbolic,
        margin,
        sign,
        stable_index: stable,
        unstable_index: unstable,
        c: None,
        log_c: None,
        divergence: div,
        checks,
        notes,
        samples: vec![p.to_vec()],
        unstable_directions,
        stable_directions,
    })
}
