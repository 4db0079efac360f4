//! Detection of recurrent, non-hyperbolic invariant sets.
//!
//! The set is described by constraint functions G_k whose level sets it
//! lies in. The seed is refined until X is tangent to the level sets
//! (dG_k(X) = 0), then the return map restricted to those level sets is
//! iterated. The probe fires when the iterates stay in a tube around the
//! set and the restricted multiplier has unit modulus. A Newton fixed
//! point is reported but does not stop the probe: a unit multiplier there
//! means a circle of closed leaves rather than a hyperbolic orbit.

use super::integrate::{Flow, FlowOptions, Outcome, Section, Stop};
use crate::contact::Foliation;
use crate::error::{Error, Result};
use crate::exterior::{ScalarField, Tape};
use crate::numeric::{linalg, Dual, Field};
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct RecurrenceProbe {
    pub constraints: Vec<ScalarField>,
    pub seed: Vec<f64>,
    pub iterations: usize,
    pub tube: f64,
    pub t_max: f64,
    pub unit_band: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceReport {
    pub refined_point: Vec<f64>,
    /// G_k at the refined point.
    pub levels: Vec<f64>,
    /// max_k |dG_k(X)| / (|dG_k| |X|) at the refined point.
    pub tangency_residual: f64,
    /// Largest |G_k − level| over the raw returns.
    pub max_deviation: f64,
    pub returns: usize,
    pub newton_converged: bool,
    /// |P(x) − x| along the set when Newton stopped.
    pub newton_residual: f64,
    pub restricted_multiplier: f64,
    pub fired: bool,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub iterates: Vec<Vec<f64>>,
}

struct Constraints {
    values: Tape,
    grads: Tape,
    k: usize,
}

impl Constraints {
    fn new(fields: &[ScalarField], d: usize) -> Self {
        let mut g = Vec::new();
        for f in fields {
            g.extend(f.gradient(d));
        }
        Constraints { values: Tape::new(fields), grads: Tape::new(&g), k: fields.len() }
    }

    fn jet(&self, p: &[f64], d: usize) -> Vec<(f64, Vec<f64>)> {
        let v = self.values.eval(&Dual::seed(p));
        v.iter().map(|x| (x.v, x.d[..d].to_vec())).collect()
    }
}

/// Minimum-norm projection onto Σ ∩ {G = levels} ∩ {s = 0}.
fn project_all(fol: &Foliation, cons: &Constraints, levels: &[f64], sec: &dyn Section, p: &[f64]) -> Result<Vec<f64>> {
    let d = fol.dim();
    let mut x = p.to_vec();
    let mut res = f64::INFINITY;
    for _ in 0..40 {
        let (f, gf) = fol.surface.value_grad(&x);
        let mut rows = vec![gf];
        let mut r = vec![f];
        for (k, (v, g)) in cons.jet(&x, d).into_iter().enumerate() {
            rows.push(g);
            r.push(v - levels[k]);
        }
        rows.push(sec.gradient(&x));
        r.push(sec.value(&x));
        res = r.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if res < 1e-13 {
            return Ok(x);
        }
        let m = rows.len();
        let j: Vec<f64> = rows.concat();
        let step = linalg::pinv_solve(&j, m, d, &r);
        for i in 0..d {
            x[i] -= step[i];
        }
    }
    if res < 1e-10 {
        return Ok(x);
    }
    Err(Error::ProjectionFailed { iterations: 40, residual: res })
}

/// Gauss-Newton on F = c, dG_k(X) = 0 (minimum-norm steps).
fn refine(fol: &Foliation, cons: &Constraints, seed: &[f64]) -> Result<(Vec<f64>, f64)> {
    let d = fol.dim();
    let mut x = fol.surface.project(seed, fol.policy.projection_tol, fol.policy.projection_max_iter)?;
    let tang = |x: &[f64]| -> Result<(Vec<Dual>, f64)> {
        let xd = Dual::seed(x);
        let l = fol.local(&xd)?;
        let g = cons.grads.eval(&xd);
        let mut h = Vec::with_capacity(cons.k);
        let mut rel = 0.0f64;
        let xn: f64 = l.x.iter().map(|v| v.v * v.v).sum::<f64>().sqrt();
        for k in 0..cons.k {
            let mut s = Dual::zero();
            let mut gn = 0.0;
            for i in 0..d {
                s += g[k * d + i] * l.x[i];
                gn += g[k * d + i].v * g[k * d + i].v;
            }
            rel = rel.max(s.v.abs() / (gn.sqrt() * xn).max(1e-300));
            h.push(s);
        }
        Ok((h, rel))
    };
    for _ in 0..60 {
        let (h, rel) = tang(&x)?;
        let (f, gf) = fol.surface.value_grad(&Dual::seed(&x));
        let mut rows = vec![gf.iter().map(|v| v.v).collect::<Vec<f64>>()];
        let mut r = vec![f.v];
        for hk in &h {
            rows.push(hk.d[..d].to_vec());
            r.push(hk.v);
        }
        if rel < 1e-13 && f.v.abs() < 1e-13 {
            break;
        }
        let m = rows.len();
        let step = linalg::pinv_solve(&rows.concat(), m, d, &r);
        let sn = linalg::norm(&step);
        let sc = if sn > 0.05 { 0.05 / sn } else { 1.0 };
        for i in 0..d {
            x[i] -= sc * step[i];
        }
        if sn < 1e-15 {
            break;
        }
    }
    let x = fol.surface.project(&x, fol.policy.projection_tol, fol.policy.projection_max_iter)?;
    let (_, rel) = tang(&x)?;
    Ok((x, rel))
}

/// Tangent line of Σ ∩ {G = const} ∩ {s = 0} at p (assumed 1-dimensional).
fn set_tangent(fol: &Foliation, cons: &Constraints, sec: &dyn Section, p: &[f64]) -> Vec<f64> {
    let d = fol.dim();
    let (_, gf) = fol.surface.value_grad(p);
    let mut rows = vec![gf];
    rows.extend(cons.jet(p, d).into_iter().map(|(_, g)| g));
    rows.push(sec.gradient(p));
    let c = linalg::complement_basis(&rows, d);
    c.into_iter().next().unwrap_or_else(|| vec![0.0; d])
}

pub fn probe_recurrence(fol: &Foliation, sec: &dyn Section, probe: &RecurrenceProbe) -> Result<RecurrenceReport> {
    let d = fol.dim();
    let cons = Constraints::new(&probe.constraints, d);
    let (refined, tangency) = refine(fol, &cons, &probe.seed)?;
    let levels: Vec<f64> = cons.jet(&refined, d).into_iter().map(|(v, _)| v).collect();
    let mut notes = Vec::new();
    let flow = Flow::new(fol).with_options(FlowOptions::from_policy(&fol.policy));
    let mut x = project_all(fol, &cons, &levels, sec, &refined)?;
    let start = x.clone();
    let mut iterates = vec![x.clone()];
    let mut max_dev = 0.0f64;
    let mut returns = 0;
    for _ in 0..probe.iterations {
        let run = flow.run_state(flow.initial(&x), &Stop::section(probe.t_max, sec))?;
        if run.outcome != Outcome::Section {
            notes.push("no return to the section".into());
            break;
        }
        let y = run.point().to_vec();
        let dev = cons.jet(&y, d).iter().zip(&levels).map(|((v, _), l)| (v - l).abs()).fold(0.0f64, f64::max);
        max_dev = max_dev.max(dev);
        returns += 1;
        if dev > probe.tube {
            notes.push(format!("iterate left the tube (deviation {dev:e})"));
            break;
        }
        x = project_all(fol, &cons, &levels, sec, &y)?;
        iterates.push(x.clone());
    }
    // restricted multiplier and Newton on the restricted map
    let var = Flow::new(fol).with_options(FlowOptions::from_policy(&fol.policy)).with_variational();
    let chart = &fol.surface.chart;
    let mut xn = start.clone();
    let mut mu = f64::NAN;
    let mut converged = false;
    let mut newton_res = f64::INFINITY;
    for it in 0..12 {
        let run = var.run_state(var.initial(&xn), &Stop::section(probe.t_max, sec))?;
        if run.outcome != Outcome::Section {
            break;
        }
        let y = run.point().to_vec();
        let v = fol.field(&y)?;
        let phi = run.phi().unwrap();
        let n = sec.gradient(&y);
        let t0 = set_tangent(fol, &cons, sec, &xn);
        let img = linalg::matmul(phi, &t0, d, d, 1);
        let nv = linalg::dot(&n, &v);
        let ni = linalg::dot(&n, &img);
        let img: Vec<f64> = img.iter().zip(&v).map(|(a, b)| a - b * ni / nv).collect();
        let mut t1 = set_tangent(fol, &cons, sec, &y);
        if linalg::dot(&t1, &t0) < 0.0 {
            t1.iter_mut().for_each(|z| *z = -*z);
        }
        let m = linalg::dot(&t1, &img);
        if it == 0 {
            mu = m;
        }
        let yp = project_all(fol, &cons, &levels, sec, &y)?;
        let r = chart.delta(&xn, &yp);
        newton_res = linalg::norm(&r);
        if newton_res < 1e-9 {
            converged = true;
            break;
        }
        let rho = linalg::dot(&t0, &r);
        let mut step = -rho / (m - 1.0);
        if !step.is_finite() || step.abs() > 0.05 {
            step = 0.05 * step.signum();
        }
        let cand: Vec<f64> = xn.iter().zip(&t0).map(|(a, b)| a + step * b).collect();
        xn = project_all(fol, &cons, &levels, sec, &cand)?;
    }
    let in_tube = returns == probe.iterations && max_dev <= probe.tube;
    let unit = (mu.abs() - 1.0).abs() < probe.unit_band;
    let fired = in_tube && unit;
    if !in_tube {
        notes.push("iterates did not stay in the tube".into());
    }
    if converged {
        notes.push("restricted return map has a fixed point".into());
    } else {
        notes.push("no fixed point of the restricted return map".into());
    }
    Ok(RecurrenceReport {
        refined_point: refined,
        levels,
        tangency_residual: tangency,
        max_deviation: max_dev,
        returns,
        newton_converged: converged,
        newton_residual: newton_res,
        restricted_multiplier: mu,
        fired,
        notes,
        iterates,
    })
}
