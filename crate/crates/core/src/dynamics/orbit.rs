//! Closed orbits: Newton on the return map, then the monodromy as a chain
//! of short section-to-section maps written in adapted bases.
//!
//! On a section L transverse to X, λ = α|L is contact. In a basis
//! (R_L, e_1, f_1, …) with R_L the Reeb field of λ and (e_i, f_i) a
//! symplectic basis of (ker λ, dλ), every section-to-section map has the
//! block form [[c, 0], [∗, M]] with Mᵀ J₀ M = c·J₀. The return map is the
//! product, so C = Π c_j and the remaining multipliers are eig(Π M_j).

use super::element::{sign_of, Check, CriticalElement, Kind};
use super::integrate::{Flow, FlowOptions, Hyperplane, Outcome, Reversed, Section, Stop};
use crate::contact::Foliation;
use crate::error::{Error, Result};
use crate::numeric::linalg;
use nalgebra::Complex;
use serde::Serialize;

/// Newton projection onto Σ ∩ {s = 0}.
pub fn project_on_section(fol: &Foliation, sec: &dyn Section, p: &[f64]) -> Result<Vec<f64>> {
    let tol = fol.policy.projection_tol;
    let mut x = p.to_vec();
    let mut res = f64::INFINITY;
    for _ in 0..=fol.policy.projection_max_iter {
        let (f, gf) = fol.surface.value_grad(&x);
        let s = sec.value(&x);
        let gs = sec.gradient(&x);
        res = f.abs().max(s.abs());
        if res <= tol {
            return Ok(x);
        }
        let a = [linalg::dot(&gf, &gf), linalg::dot(&gf, &gs), linalg::dot(&gs, &gf), linalg::dot(&gs, &gs)];
        let y = linalg::solve(a.to_vec(), 2, &[f, s]).map_err(|_| Error::DegenerateFrame("section tangent to Σ".into()))?;
        for i in 0..x.len() {
            x[i] -= y[0] * gf[i] + y[1] * gs[i];
        }
    }
    Err(Error::ProjectionFailed { iterations: fol.policy.projection_max_iter, residual: res })
}

/// Orthonormal basis of T_p(Σ ∩ {s = 0}).
pub fn section_basis(fol: &Foliation, sec: &dyn Section, p: &[f64]) -> Vec<Vec<f64>> {
    let (_, gf) = fol.surface.value_grad(p);
    linalg::complement_basis(&[gf, sec.gradient(p)], fol.dim())
}

/// (I − v nᵀ/(n·v)) Φ: the differential of the hitting map onto a section
/// with conormal n, for a flow with velocity v at the hitting point.
fn reduce(phi: &[f64], v: &[f64], n: &[f64], d: usize) -> Vec<f64> {
    let nv = linalg::dot(n, v);
    let mut out = phi.to_vec();
    for j in 0..d {
        let np: f64 = (0..d).map(|k| n[k] * phi[k * d + j]).sum();
        for i in 0..d {
            out[i * d + j] -= v[i] * np / nv;
        }
    }
    out
}

fn apply(m: &[f64], d: usize, v: &[f64]) -> Vec<f64> {
    linalg::matmul(m, v, d, d, 1)
}

/// Reeb vector and symplectic kernel basis of α restricted to a section
/// whose tangent space has orthonormal basis `e`, as ambient vectors.
pub fn adapted_basis(fol: &Foliation, p: &[f64], e: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let m = e.len();
    let lam = fol.scene.alpha_at(p).restrict(e);
    let w2 = fol.scene.dalpha_at(p).restrict(e);
    let mut w = vec![0.0; m * m];
    let masks: &[u32] = if m >= 2 { &w2.basis().masks } else { &[] };
    for (r, &mask) in masks.iter().enumerate() {
        let i = mask.trailing_zeros() as usize;
        let j = (31 - mask.leading_zeros()) as usize;
        w[i * m + j] = w2.c[r];
        w[j * m + i] = -w2.c[r];
    }
    let om = |a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += a[i] * w[i * m + j] * b[j];
            }
        }
        s
    };
    // Reeb: λ(R) = 1, ω(R, ·) = 0
    let nb = m + 1;
    let mut sys = vec![0.0; nb * nb];
    for j in 0..m {
        for i in 0..m {
            sys[j * nb + i] = w[i * m + j];
        }
        sys[j * nb + m] = lam.c[j];
        sys[m * nb + j] = lam.c[j];
    }
    let mut rhs = vec![0.0; nb];
    rhs[m] = 1.0;
    let sol = linalg::solve(sys, nb, &rhs).map_err(|_| Error::ContactViolation("section form is not contact".into()))?;
    let mut coords = vec![sol[..m].to_vec()];
    let mut rem = linalg::complement_basis(&[lam.c.clone()], m);
    while !rem.is_empty() {
        let a = rem.remove(0);
        let (idx, _) = rem
            .iter()
            .enumerate()
            .map(|(i, b)| (i, om(&a, b).abs()))
            .fold((usize::MAX, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if idx == usize::MAX {
            return Err(Error::ContactViolation("dλ degenerate on ker λ of the section".into()));
        }
        let b = rem.remove(idx);
        let wab = om(&a, &b);
        let b: Vec<f64> = b.iter().map(|x| x / wab).collect();
        for v in rem.iter_mut() {
            let (va, vb) = (om(v, &a), om(v, &b));
            for i in 0..m {
                v[i] += -vb * a[i] + va * b[i];
            }
        }
        coords.push(a);
        coords.push(b);
    }
    Ok(coords
        .into_iter()
        .map(|c| {
            let mut v = vec![0.0; fol.dim()];
            for (k, ek) in e.iter().enumerate() {
                for i in 0..v.len() {
                    v[i] += c[k] * ek[i];
                }
            }
            v
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureResiduals {
    /// |det dP − Cⁿ| / Cⁿ.
    pub det: f64,
    /// Largest relative mismatch of the pairing μ ↦ C/μ.
    pub pairing: f64,
    /// ‖Mᵀ J₀ M − C J₀‖ / C.
    pub symplectic: f64,
    /// Largest λ'(D v) / |D v| over v ∈ ker λ.
    pub kernel: f64,
    /// |∫g dt − log C| / max(1, |log C|).
    pub conformal: f64,
    /// |∫div dt − n log C| / max(1, n |log C|).
    pub divergence: f64,
    /// Largest gap between a chain segment's end and the next chain point.
    pub chain_closure: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReturnMapAnalysis {
    pub fixed_point: Vec<f64>,
    pub period: f64,
    /// Newton ran on the backward map.
    pub backward_newton: bool,
    pub newton_iterations: usize,
    /// |P(x) − x| at the accepted fixed point.
    pub closure: f64,
    pub chain_sections: usize,
    /// dP in the adapted basis at the first chain section.
    pub dp: Vec<f64>,
    pub dim: usize,
    pub c: f64,
    pub log_c: f64,
    pub log_abs_det: f64,
    pub eigenvalues: Vec<[f64; 2]>,
    /// ln|μ| for every multiplier, computed from the factors.
    pub log_moduli: Vec<f64>,
    pub mean_divergence: f64,
    pub integral_g: f64,
    pub integral_div: f64,
    pub residuals: StructureResiduals,
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
    #[serde(skip)]
    pub unstable_directions: Vec<Vec<f64>>,
    #[serde(skip)]
    pub stable_directions: Vec<Vec<f64>>,
}

/// Block data of one section-to-section map in adapted bases.
#[derive(Debug, Clone)]
pub struct Block {
    /// (2n−1)×(2n−1), row-major.
    pub a: Vec<f64>,
    pub m: usize,
}

/// Multipliers and structure residuals of a chain of blocks.
pub struct ChainSpectrum {
    pub c: f64,
    pub log_c: f64,
    pub log_abs_det: f64,
    pub product: Vec<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
    pub log_moduli: Vec<f64>,
    pub det: f64,
    pub pairing: f64,
    pub symplectic: f64,
    pub kernel: f64,
}

fn j0(k: usize) -> Vec<f64> {
    let mut j = vec![0.0; k * k];
    for i in (0..k).step_by(2) {
        j[i * k + i + 1] = 1.0;
        j[(i + 1) * k + i] = -1.0;
    }
    j
}

/// Spectrum of Π blocks (applied first to last).
pub fn chain_spectrum(blocks: &[Block], n: usize) -> Result<ChainSpectrum> {
    let m = blocks.first().map(|b| b.m).ok_or_else(|| Error::Invalid("empty chain".into()))?;
    let k = m - 1;
    let mut log_c = 0.0;
    let mut c_sign = 1.0;
    let mut log_det = 0.0;
    let mut kernel = 0.0f64;
    let mut mm: Vec<f64> = (0..k * k).map(|i| if i / k.max(1) == i % k.max(1) { 1.0 } else { 0.0 }).collect();
    let mut prod: Vec<f64> = (0..m * m).map(|i| if i / m == i % m { 1.0 } else { 0.0 }).collect();
    let mut symp = 0.0f64;
    let j = j0(k);
    for b in blocks {
        let c = b.a[0];
        log_c += c.abs().ln();
        c_sign *= c.signum();
        let det = linalg::det(b.a.clone(), m);
        log_det += det.abs().ln();
        for col in 1..m {
            let colnorm: f64 = (0..m).map(|r| b.a[r * m + col].powi(2)).sum::<f64>().sqrt();
            kernel = kernel.max(b.a[col].abs() / colnorm.max(1e-300));
        }
        let mj: Vec<f64> = (0..k * k).map(|i| b.a[(1 + i / k) * m + 1 + i % k]).collect();
        if k > 0 {
            let mt = linalg::transpose(&mj, k, k);
            let s = linalg::matmul(&linalg::matmul(&mt, &j, k, k, k), &mj, k, k, k);
            for i in 0..k * k {
                symp = symp.max((s[i] - c * j[i]).abs() / c.abs());
            }
            mm = linalg::matmul(&mj, &mm, k, k, k);
        }
        prod = linalg::matmul(&b.a, &prod, m, m, m);
    }
    if c_sign < 0.0 {
        return Err(Error::ContactViolation("return map reverses the section co-orientation".into()));
    }
    let c = log_c.exp();
    let mut eigenvalues = vec![Complex::new(c, 0.0)];
    let em = linalg::eigenvalues(&mm, k);
    eigenvalues.extend(em.iter().copied());
    let mut log_moduli = vec![log_c];
    log_moduli.extend(em.iter().map(|z| z.norm().ln()));
    let det = ((log_det - n as f64 * log_c).exp() - 1.0).abs();
    let mut pairing = 0.0f64;
    for mu in &em {
        let target = Complex::new(c, 0.0) / mu;
        let best = em.iter().map(|nu| (nu - target).norm() / target.norm()).fold(f64::INFINITY, f64::min);
        pairing = pairing.max(best);
    }
    Ok(ChainSpectrum { c, log_c, log_abs_det: log_det, product: prod, eigenvalues, log_moduli, det, pairing, symplectic: symp, kernel })
}

/// Options of the orbit search.
#[derive(Debug, Clone, Copy)]
pub struct OrbitOptions {
    /// Bound on the time to return to the section.
    pub t_max: f64,
    /// Largest Newton step on the section.
    pub max_step: f64,
    /// Crossings farther than this from the current point are skipped.
    pub locality: Option<f64>,
    /// Target ln-growth per chain segment.
    pub segment_log: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions { t_max: 100.0, max_step: 0.05, locality: None, segment_log: 2.5 }
    }
}

/// Newton on the return map of `sec` from `seed`, then the chain analysis.
///
/// Integrates backward when the divergence at the seed is positive. If the
/// return is never reached that way, the other direction is tried.
pub fn find_orbit(fol: &Foliation, sec: &dyn Section, seed: &[f64], opts: &OrbitOptions) -> Result<ReturnMapAnalysis> {
    let x = project_on_section(fol, sec, seed)?;
    let backward = fol.divergence(&x)? > 0.0;
    // Crossings are counted in the direction X crosses the section at the seed.
    let flip = linalg::dot(&sec.gradient(&x), &fol.field(&x)?) < 0.0;
    match find_orbit_directed(fol, sec, x.clone(), opts, backward, flip) {
        Err(Error::Escape(_)) => find_orbit_directed(fol, sec, x, opts, !backward, flip),
        r => r,
    }
}

fn find_orbit_directed(
    fol: &Foliation,
    sec: &dyn Section,
    mut x: Vec<f64>,
    opts: &OrbitOptions,
    backward: bool,
    flip: bool,
) -> Result<ReturnMapAnalysis> {
    let rev = Reversed(sec);
    let sec: &dyn Section = if backward != flip { &rev } else { sec };
    let pol = fol.policy;
    let d = fol.dim();
    let chart = fol.surface.chart.clone();
    let fo = FlowOptions::orbit(&pol);
    let flow = Flow::new(fol).with_options(fo).backward(backward).with_variational();
    let sg = if backward { -1.0 } else { 1.0 };
    let mut last: Option<(f64, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut best = f64::INFINITY;
    let mut converged = None;
    for it in 0..pol.newton_max_iter {
        iterations = it + 1;
        let stop = Stop { locality: opts.locality.map(|r| (x.clone(), r)), ..Stop::section(opts.t_max, sec) };
        let run = flow.run_state(flow.initial(&x), &stop)?;
        if run.outcome != Outcome::Section {
            return Err(Error::Escape(opts.t_max));
        }
        let px = run.point().to_vec();
        let r = chart.delta(&x, &px);
        let rn = linalg::norm(&r);
        let e = section_basis(fol, sec, &x);
        let v: Vec<f64> = fol.field(&px)?.iter().map(|c| sg * c).collect();
        let dp = reduce(run.phi().unwrap(), &v, &sec.gradient(&px), d);
        let m = e.len();
        let mut a = vec![0.0; m * m];
        for (c, ec) in e.iter().enumerate() {
            let img = apply(&dp, d, ec);
            for (rr, er) in e.iter().enumerate() {
                a[rr * m + c] = linalg::dot(er, &img);
            }
        }
        last = Some((run.t, a.clone()));
        best = best.min(rn);
        if rn < pol.orbit_newton_tol {
            converged = Some((x.clone(), run.t, rn));
            break;
        }
        for i in 0..m {
            a[i * m + i] -= 1.0;
        }
        let rhs: Vec<f64> = e.iter().map(|ei| -linalg::dot(ei, &r)).collect();
        let Ok(mut delta) = linalg::solve(a, m, &rhs) else {
            break;
        };
        let dn = linalg::norm(&delta);
        if dn > opts.max_step {
            delta.iter_mut().for_each(|z| *z *= opts.max_step / dn);
        }
        let mut xn = x.clone();
        for (k, ek) in e.iter().enumerate() {
            for i in 0..d {
                xn[i] += delta[k] * ek[i];
            }
        }
        x = project_on_section(fol, sec, &xn)?;
        if dn < pol.orbit_newton_tol * 1e-2 && rn < pol.orbit_newton_tol * 1e3 {
            converged = Some((x.clone(), run.t, rn));
            break;
        }
    }
    let Some((xs, period, closure)) = converged else {
        return Err(Error::NoOrbit(format!("return-map Newton did not converge (best |P(x) - x| = {best:e})")));
    };
    let (_, a_last) = last.unwrap();
    let m = d - 2;
    let maxlog = linalg::singular_values(&a_last, m, m).iter().map(|s| s.ln().abs()).fold(0.0f64, f64::max);
    let k = ((maxlog / opts.segment_log).ceil() as usize).clamp(4, 64);
    let mut an = analyze_chain(fol, &xs, period, backward, k)?;
    an.newton_iterations = iterations;
    an.closure = closure;
    Ok(an)
}

/// Monodromy analysis of the closed orbit through `x` with the given period.
pub fn analyze_chain(fol: &Foliation, x: &[f64], period: f64, backward: bool, k: usize) -> Result<ReturnMapAnalysis> {
    let pol = fol.policy;
    let d = fol.dim();
    let n = fol.n();
    let chart = fol.surface.chart.clone();
    let fo = FlowOptions::orbit(&pol);
    // chain points, sampled in the stable time direction
    let plain = Flow::new(fol).with_options(fo).backward(backward);
    let mut b = vec![x.to_vec()];
    let mut cur = x.to_vec();
    for _ in 1..k {
        let r = plain.run_state(plain.initial(&cur), &Stop::time(period / k as f64))?;
        cur = r.point().to_vec();
        b.push(cur.clone());
    }
    let q: Vec<Vec<f64>> = if backward { (0..k).map(|j| b[(k - j) % k].clone()).collect() } else { b };
    let sections: Vec<Hyperplane> = q
        .iter()
        .map(|p| {
            let v = fol.field(p)?;
            let nv = linalg::norm(&v);
            Ok(Hyperplane { chart: chart.clone(), point: p.clone(), normal: v.iter().map(|c| c / nv).collect() })
        })
        .collect::<Result<_>>()?;
    let bases: Vec<Vec<Vec<f64>>> = q
        .iter()
        .zip(&sections)
        .map(|(p, s)| adapted_basis(fol, p, &section_basis(fol, s, p)))
        .collect::<Result<_>>()?;
    let fwd = Flow::new(fol).with_options(fo).with_variational().with_aux();
    let mut blocks = Vec::with_capacity(k);
    let mut integral_g = 0.0;
    let mut integral_div = 0.0;
    let mut samples = Vec::new();
    let mut chain_closure = 0.0f64;
    let mut total_t = 0.0;
    let m = d - 2;
    for j in 0..k {
        let jn = (j + 1) % k;
        let stop = Stop { record: true, ..Stop::section(3.0 * period / k as f64, &sections[jn]) };
        let run = fwd.run_state(fwd.initial(&q[j]), &stop)?;
        if run.outcome != Outcome::Section {
            return Err(Error::NoOrbit(format!("chain segment {j} did not reach the next section")));
        }
        samples.extend(run.samples.iter().map(|(_, p)| p.clone()));
        total_t += run.t;
        let e = run.point().to_vec();
        chain_closure = chain_closure.max(chart.distance(&e, &q[jn]));
        let (ig, idv) = run.integrals().unwrap();
        integral_g += ig;
        integral_div += idv;
        let v = fol.field(&e)?;
        let dj = reduce(run.phi().unwrap(), &v, &sections[jn].normal, d);
        let mut a = vec![0.0; m * m];
        for (c, bc) in bases[j].iter().enumerate() {
            let img = apply(&dj, d, bc);
            let co = linalg::coefficients(&bases[jn], &img).ok_or_else(|| Error::DegenerateFrame("adapted basis".into()))?;
            for r in 0..m {
                a[r * m + c] = co[r];
            }
        }
        blocks.push(Block { a, m });
    }
    let spec = chain_spectrum(&blocks, n)?;
    let log_c = spec.log_c;
    let residuals = StructureResiduals {
        det: spec.det,
        pairing: spec.pairing,
        symplectic: spec.symplectic,
        kernel: spec.kernel,
        conformal: (integral_g - log_c).abs() / log_c.abs().max(1.0),
        divergence: (integral_div - n as f64 * log_c).abs() / (n as f64 * log_c.abs()).max(1.0),
        chain_closure,
    };
    // invariant directions from the product in the first adapted basis
    let unstable = spec.log_moduli.iter().filter(|l| **l > 0.0).count();
    let stable = spec.log_moduli.iter().filter(|l| **l < 0.0).count();
    let to_ambient = |vs: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        vs.into_iter()
            .map(|c| {
                let mut v = vec![0.0; d];
                for (kk, bk) in bases[0].iter().enumerate() {
                    for i in 0..d {
                        v[i] += c[kk] * bk[i];
                    }
                }
                v
            })
            .collect()
    };
    let mut inv: Vec<f64> = (0..m * m).map(|i| if i / m == i % m { 1.0 } else { 0.0 }).collect();
    for bl in &blocks {
        // inv ← inv · A⁻¹
        let lu = linalg::Lu::new(bl.a.clone(), m).map_err(|_| Error::DegenerateFrame("singular transition".into()))?;
        let mut ainv = vec![0.0; m * m];
        for c in 0..m {
            let mut e = vec![0.0; m];
            e[c] = 1.0;
            let col = lu.solve(&e);
            for r in 0..m {
                ainv[r * m + c] = col[r];
            }
        }
        inv = linalg::matmul(&inv, &ainv, m, m, m);
    }
    let unstable_directions = to_ambient(linalg::dominant_subspace(&spec.product, m, unstable, 80));
    let stable_directions = to_ambient(linalg::dominant_subspace(&inv, m, stable, 80));
    Ok(ReturnMapAnalysis {
        fixed_point: q[0].clone(),
        period: total_t,
        backward_newton: backward,
        newton_iterations: 0,
        closure: 0.0,
        chain_sections: k,
        dp: spec.product,
        dim: m,
        c: spec.c,
        log_c,
        log_abs_det: spec.log_abs_det,
        eigenvalues: spec.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
        log_moduli: spec.log_moduli,
        mean_divergence: integral_div / total_t,
        integral_g,
        integral_div,
        residuals,
        samples,
        unstable_directions,
        stable_directions,
    })
}

/// Hyperbolicity, Liouville sign and indices from a return-map analysis.
pub fn classify_orbit(an: &ReturnMapAnalysis, n: usize, band: f64, tol: f64) -> CriticalElement {
    let moduli: Vec<f64> = an.log_moduli.iter().map(|l| l.exp()).collect();
    let margin = an.log_moduli.iter().map(|l| (l.exp() - 1.0).abs()).fold(f64::INFINITY, f64::min);
    let hyperbolic = moduli.iter().all(|m| (m - 1.0).abs() > band);
    let stable = an.log_moduli.iter().filter(|l| **l < 0.0).count() + 1;
    let unstable = an.log_moduli.iter().filter(|l| **l > 0.0).count() + 1;
    let sign = if (an.c - 1.0).abs() > band { sign_of(an.log_c, 0.0) } else { 0 };
    let r = &an.residuals;
    let mut checks = vec![
        Check::below("det dP vs C^n", r.det, tol),
        Check::below("pairing mu <-> C/mu", r.pairing, tol),
        Check::below("symplectic block", r.symplectic, tol),
        Check::below("kernel invariance", r.kernel, tol),
        Check::below("C vs exp(int g)", r.conformal, 1e-5),
        Check::below("int div vs n log C", r.divergence, 1e-5),
        Check::flag("sign(div) = sign(log C)", an.mean_divergence.signum() == an.log_c.signum()),
    ];
    if sign > 0 {
        checks.push(Check::flag("stable_index <= n", stable <= n));
    }
    if sign < 0 {
        checks.push(Check::flag("unstable_index <= n", unstable <= n));
    }
    let mut notes = Vec::new();
    if !hyperbolic {
        notes.push("multiplier on the unit circle".into());
    }
    CriticalElement {
        kind: Kind::Orbit,
        location: an.fixed_point.clone(),
        period: Some(an.period),
        eigenvalues: an.eigenvalues.clone(),
        hyperbolic,
        margin,
        sign,
        stable_index: stable,
        unstable_index: unstable,
        c: Some(an.c),
        log_c: Some(an.log_c),
        divergence: an.mean_divergence,
        checks,
        notes,
        samples: an.samples.clone(),
        unstable_directions: an.unstable_directions.clone(),
        stable_directions: an.stable_directions.clone(),
    }
}
