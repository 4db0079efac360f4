//! Dormand–Prince 5(4) integration of the foliation field on Σ.
//!
//! The state is `[p | ∫g, ∫div | Φ]`: the point, two optional running
//! integrals (conformal rate and divergence) and an optional d×d
//! variational matrix with Φ' = DX·Φ. After every accepted step p is
//! Newton-projected back onto Σ. Angular coordinates are left unwrapped.

use crate::contact::Foliation;
use crate::error::{Error, Result};
use crate::exterior::{Chart, ScalarField, Tape};
use crate::numeric::{linalg, Dual, NumericPolicy};
use std::sync::Arc;

/// A transversal given by s(p) = 0, crossed from s < 0 to s > 0.
pub trait Section: Send + Sync {
    fn value(&self, p: &[f64]) -> f64;
    fn gradient(&self, p: &[f64]) -> Vec<f64>;
}

/// The same transversal crossed the other way, used when integrating
/// backward so that crossings keep their orientation relative to X.
pub struct Reversed<'a>(pub &'a dyn Section);

impl Section for Reversed<'_> {
    fn value(&self, p: &[f64]) -> f64 {
        -self.0.value(p)
    }
    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        self.0.gradient(p).iter().map(|g| -g).collect()
    }
}

/// {⟨n, p − q⟩ = 0}, with angular differences taken the short way.
#[derive(Debug, Clone)]
pub struct Hyperplane {
    pub chart: Arc<Chart>,
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
}

impl Section for Hyperplane {
    fn value(&self, p: &[f64]) -> f64 {
        linalg::dot(&self.normal, &self.chart.delta(&self.point, p))
    }
    fn gradient(&self, _p: &[f64]) -> Vec<f64> {
        self.normal.clone()
    }
}

/// {f(p) = 0} for an expression f.
#[derive(Debug, Clone)]
pub struct FieldSection {
    pub f: ScalarField,
    tape: Tape,
}

impl FieldSection {
    pub fn new(f: ScalarField) -> Self {
        let tape = Tape::new(std::slice::from_ref(&f));
        FieldSection { f, tape }
    }
}

impl Section for FieldSection {
    fn value(&self, p: &[f64]) -> f64 {
        self.tape.eval(p)[0]
    }
    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let j = self.tape.eval(&Dual::seed(p))[0];
        j.d[..p.len()].to_vec()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub atol: f64,
    pub rtol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
    pub projection_tol: f64,
    pub projection_max_iter: usize,
    pub on_surface: f64,
}

impl FlowOptions {
    pub fn from_policy(p: &NumericPolicy) -> Self {
        FlowOptions {
            atol: p.ode_atol,
            rtol: p.ode_rtol,
            h_init: 1e-3,
            h_max: 0.05,
            h_min: 1e-14,
            max_steps: 2_000_000,
            projection_tol: p.projection_tol,
            projection_max_iter: p.projection_max_iter,
            on_surface: p.on_surface,
        }
    }

    pub fn orbit(p: &NumericPolicy) -> Self {
        FlowOptions { atol: p.orbit_atol, rtol: p.orbit_rtol, ..Self::from_policy(p) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    TimeLimit,
    Section,
    LeftWindow,
    Monitor,
}

/// When to stop a run.
pub struct Stop<'s> {
    pub t_max: f64,
    pub section: Option<&'s dyn Section>,
    /// Crossings farther than the radius from the point are ignored.
    pub locality: Option<(Vec<f64>, f64)>,
    pub window: Option<&'s (dyn Fn(&[f64]) -> bool + Sync)>,
    pub monitor: Option<&'s (dyn Fn(f64, &[f64]) -> bool + Sync)>,
    pub record: bool,
}

impl<'s> Stop<'s> {
    pub fn time(t_max: f64) -> Self {
        Stop { t_max, section: None, locality: None, window: None, monitor: None, record: false }
    }

    pub fn section(t_max: f64, s: &'s dyn Section) -> Self {
        Stop { section: Some(s), ..Stop::time(t_max) }
    }

    pub fn recording(mut self) -> Self {
        self.record = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Run {
    pub outcome: Outcome,
    /// Elapsed time (≥ 0 in both directions).
    pub t: f64,
    pub y: Vec<f64>,
    pub samples: Vec<(f64, Vec<f64>)>,
    pub steps: usize,
    /// Largest |F − c| after projection.
    pub max_residual: f64,
    d: usize,
    aux: bool,
}

impl Run {
    pub fn point(&self) -> &[f64] {
        &self.y[..self.d]
    }

    /// (∫g dt, ∫div dt) along the run, if integrated.
    pub fn integrals(&self) -> Option<(f64, f64)> {
        self.aux.then(|| (self.y[self.d], self.y[self.d + 1]))
    }

    /// The variational matrix (row-major), if integrated.
    pub fn phi(&self) -> Option<&[f64]> {
        let off = self.d + if self.aux { 2 } else { 0 };
        (self.y.len() > off).then(|| &self.y[off..])
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// The flow of ±X on Σ.
pub struct Flow<'a> {
    pub fol: &'a Foliation,
    pub opts: FlowOptions,
    /// +1 forward, −1 backward in time.
    pub direction: f64,
    pub aux: bool,
    pub variational: bool,
}

impl<'a> Flow<'a> {
    pub fn new(fol: &'a Foliation) -> Self {
        Flow { fol, opts: FlowOptions::from_policy(&fol.policy), direction: 1.0, aux: false, variational: false }
    }

    pub fn with_options(mut self, o: FlowOptions) -> Self {
        self.opts = o;
        self
    }

    pub fn backward(mut self, yes: bool) -> Self {
        self.direction = if yes { -1.0 } else { 1.0 };
        self
    }

    pub fn with_aux(mut self) -> Self {
        self.aux = true;
        self
    }

    pub fn with_variational(mut self) -> Self {
        self.variational = true;
        self
    }

    fn d(&self) -> usize {
        self.fol.dim()
    }

    /// Initial state for a point: zero integrals, Φ = I.
    pub fn initial(&self, p: &[f64]) -> Vec<f64> {
        let d = self.d();
        let mut y = p.to_vec();
        if self.aux {
            y.extend([0.0, 0.0]);
        }
        if self.variational {
            for i in 0..d {
                for j in 0..d {
                    y.push(if i == j { 1.0 } else { 0.0 });
                }
            }
        }
        y
    }

    fn rhs(&self, y: &[f64]) -> Result<Vec<f64>> {
        let d = self.d();
        let s = self.fol.sample(&y[..d], self.variational)?;
        let sg = self.direction;
        let mut out: Vec<f64> = s.x.iter().map(|v| sg * v).collect();
        let mut off = d;
        if self.aux {
            out.push(sg * s.g);
            out.push(sg * s.div);
            off += 2;
        }
        if let Some(dx) = &s.dx {
            let phi = &y[off..];
            let prod = linalg::matmul(dx, phi, d, d, d);
            out.extend(prod.into_iter().map(|v| sg * v));
        }
        Ok(out)
    }

    /// One Dormand–Prince step; returns the 5th-order state and the
    /// scaled error norm.
    fn step(&self, y: &[f64], h: f64) -> Result<(Vec<f64>, f64)> {
        let m = y.len();
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        k.push(self.rhs(y)?);
        let mut ys = y.to_vec();
        for s in 1..7 {
            ys.copy_from_slice(y);
            for (j, kj) in k.iter().enumerate() {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..m {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            k.push(self.rhs(&ys)?);
        }
        // the 7th stage sits at the 5th-order solution (FSAL)
        let mut err = 0.0f64;
        for i in 0..m {
            let mut e = 0.0;
            for j in 0..7 {
                let b5 = if j < 6 { A[6][j] } else { 0.0 };
                e += (b5 - B4[j]) * k[j][i];
            }
            let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(ys[i].abs());
            err = err.max((h * e).abs() / sc);
        }
        Ok((ys, err))
    }

    fn project(&self, y: &mut [f64]) -> Result<f64> {
        let d = self.d();
        let surf = &self.fol.surface;
        match surf.project(&y[..d], self.opts.projection_tol, self.opts.projection_max_iter) {
            Ok(p) => y[..d].copy_from_slice(&p),
            Err(_) => {
                let r = surf.residual(&y[..d]).abs();
                if r > self.opts.on_surface {
                    return Err(Error::ProjectionFailed { iterations: self.opts.projection_max_iter, residual: r });
                }
            }
        }
        Ok(surf.residual(&y[..d]).abs())
    }

    /// Integrates from a full state `y0` until a stop condition.
    pub fn run_state(&self, y0: Vec<f64>, stop: &Stop) -> Result<Run> {
        let d = self.d();
        let mut y = y0;
        let mut t = 0.0;
        let mut h = self.opts.h_init.min(self.opts.h_max);
        let mut samples = Vec::new();
        if stop.record {
            samples.push((0.0, y[..d].to_vec()));
        }
        let mut armed = false;
        let arm_tol = 1e-9;
        let mut s_prev = stop.section.map(|s| s.value(&y[..d])).unwrap_or(0.0);
        if s_prev < -arm_tol {
            armed = true;
        }
        let mut max_res = 0.0f64;
        let mut steps = 0;
        let fail = |t: f64, y: &[f64], reason: String| Error::Integration { t, reason, last_point: y[..d].to_vec() };
        loop {
            if steps >= self.opts.max_steps {
                return Err(fail(t, &y, "step budget exhausted".into()));
            }
            if t >= stop.t_max {
                return Ok(self.finish(Outcome::TimeLimit, t, y, samples, steps, max_res, stop));
            }
            let hh = h.min(stop.t_max - t).min(self.opts.h_max);
            let (mut yn, err) = match self.step(&y, hh) {
                Ok(v) => v,
                Err(e) => {
                    if hh > self.opts.h_min * 10.0 {
                        h = hh * 0.25;
                        continue;
                    }
                    return Err(fail(t, &y, e.to_string()));
                }
            };
            if !err.is_finite() || err > 1.0 {
                let f = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.1) } else { 0.1 };
                h = hh * f;
                if h < self.opts.h_min {
                    return Err(fail(t, &y, "step size underflow".into()));
                }
                continue;
            }
            steps += 1;
            max_res = max_res.max(self.project(&mut yn)?);
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if let Some(sec) = stop.section {
                let s_new = sec.value(&yn[..d]);
                if armed && s_prev < 0.0 && s_new >= 0.0 {
                    let (th, ye) = self.locate(&y, hh, s_prev, s_new, sec)?;
                    let local = match &stop.locality {
                        Some((q, r)) => self.fol.surface.chart.distance(q, &ye[..d]) <= *r,
                        None => true,
                    };
                    if local {
                        let mut ye = ye;
                        max_res = max_res.max(self.project(&mut ye)?);
                        if stop.record {
                            samples.push((t + th, ye[..d].to_vec()));
                        }
                        return Ok(self.finish(Outcome::Section, t + th, ye, samples, steps, max_res, stop));
                    }
                }
                if s_new < -arm_tol {
                    armed = true;
                }
                s_prev = s_new;
            }
            t += hh;
            y = yn;
            if stop.record {
                samples.push((t, y[..d].to_vec()));
            }
            if let Some(w) = stop.window {
                if !w(&y[..d]) {
                    return Ok(self.finish(Outcome::LeftWindow, t, y, samples, steps, max_res, stop));
                }
            }
            if let Some(m) = stop.monitor {
                if m(t, &y[..d]) {
                    return Ok(self.finish(Outcome::Monitor, t, y, samples, steps, max_res, stop));
                }
            }
            h = hh * grow;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(&self, outcome: Outcome, t: f64, y: Vec<f64>, samples: Vec<(f64, Vec<f64>)>, steps: usize, max_residual: f64, _s: &Stop) -> Run {
        Run { outcome, t, y, samples, steps, max_residual, d: self.d(), aux: self.aux }
    }

    /// Illinois-style secant search for the crossing inside a step of size h.
    fn locate(&self, y: &[f64], h: f64, s0: f64, s1: f64, sec: &dyn Section) -> Result<(f64, Vec<f64>)> {
        let d = self.d();
        let (mut a, mut fa) = (0.0, s0);
        let (mut b, mut fb) = (h, s1);
        let mut yb = None;
        let mut side = 0;
        for _ in 0..60 {
            let c = (a * fb - b * fa) / (fb - fa);
            let c = if c <= a || c >= b { 0.5 * (a + b) } else { c };
            let (yc, _) = self.step(y, c)?;
            let fc = sec.value(&yc[..d]);
            if fc.abs() < 1e-14 || (b - a) < 1e-15 * h.max(1.0) {
                return Ok((c, yc));
            }
            if (fc < 0.0) == (fa < 0.0) {
                a = c;
                fa = fc;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = c;
                fb = fc;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
            yb = Some((c, yc));
        }
        yb.ok_or_else(|| Error::Integration { t: 0.0, reason: "event location failed".into(), last_point: y[..d].to_vec() })
    }

    /// Convenience: integrates a point for time T, recording samples.
    pub fn integrate(&self, p0: &[f64], t_max: f64) -> Result<Run> {
        self.run_state(self.initial(p0), &Stop::time(t_max).recording())
    }

    /// Runs from p until the next upward crossing of the section.
    pub fn to_section(&self, p0: &[f64], sec: &dyn Section, t_max: f64) -> Result<Run> {
        let r = self.run_state(self.initial(p0), &Stop::section(t_max, sec))?;
        if r.outcome != Outcome::Section {
            return Err(Error::Escape(t_max));
        }
        Ok(r)
    }
}
