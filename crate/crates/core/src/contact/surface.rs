use crate::error::{Error, Result};
use crate::exterior::{Chart, ScalarField, Tape};
use crate::numeric::{linalg, Field};
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub enum Presentation {
    LevelSet { f: ScalarField, c: f64 },
    /// {x_t = h(other coordinates)}.
    Graph { t_coord: usize, h: ScalarField },
}

/// Co-orientation convention recorded in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Orientation {
    /// +1: (∇F, frame) is positively oriented against dx¹∧…∧dx^{2n+1}.
    pub sign: i8,
}

impl Orientation {
    pub const POSITIVE: Orientation = Orientation { sign: 1 };
    pub const NEGATIVE: Orientation = Orientation { sign: -1 };

    pub fn describe(&self) -> &'static str {
        if self.sign > 0 {
            "ambient volume dx1^...^dxN; Σ oriented by (grad F, frame)"
        } else {
            "ambient volume dx1^...^dxN; Σ oriented by -(grad F, frame)"
        }
    }
}

/// A hypersurface {F = c}; graphs are stored as F = t − h, c = 0.
#[derive(Debug, Clone)]
pub struct Hypersurface {
    pub chart: Arc<Chart>,
    pub presentation: Presentation,
    pub orientation: Orientation,
    pub f: ScalarField,
    pub c: f64,
    pub grad: Vec<ScalarField>,
    tape: Tape,
}

/// 2n tangent vectors at a point of Σ together with the normal used for Ω.
#[derive(Debug, Clone)]
pub struct TangentFrame<T> {
    pub point: Vec<T>,
    pub normal: Vec<T>,
    pub vectors: Vec<Vec<T>>,
    /// Ω(v_1, …, v_2n) = orientation · vol(N, v_1, …, v_2n).
    pub volume: T,
    /// Coordinate left out when building the frame.
    pub skipped: usize,
}

impl Hypersurface {
    pub fn level_set(chart: Arc<Chart>, f: ScalarField, c: f64) -> Result<Self> {
        Self::build(chart, Presentation::LevelSet { f: f.clone(), c }, f, c)
    }

    pub fn graph(chart: Arc<Chart>, t_coord: usize, h: ScalarField) -> Result<Self> {
        if chart.is_angular(t_coord) {
            return Err(Error::Invalid(format!("graph coordinate `{}` is angular", chart.coords[t_coord].name)));
        }
        if h.partial(t_coord).as_const() != Some(0.0) {
            return Err(Error::Invalid("graph height must not depend on the graph coordinate".into()));
        }
        let f = ScalarField::coord(t_coord).sub(&h);
        Self::build(chart, Presentation::Graph { t_coord, h }, f, 0.0)
    }

    fn build(chart: Arc<Chart>, presentation: Presentation, f: ScalarField, c: f64) -> Result<Self> {
        let d = chart.dim();
        if let Some(m) = f.max_coord() {
            if m >= d {
                return Err(Error::ChartMismatch("level function references a missing coordinate".into()));
            }
        }
        let grad = f.gradient(d);
        let mut fields = vec![f.clone()];
        fields.extend(grad.iter().cloned());
        let tape = Tape::new(&fields);
        Ok(Hypersurface { chart, presentation, orientation: Orientation::POSITIVE, f, c, grad, tape })
    }

    pub fn with_orientation(mut self, o: Orientation) -> Self {
        self.orientation = o;
        self
    }

    pub fn reversed(&self) -> Self {
        let mut s = self.clone();
        s.orientation = Orientation { sign: -self.orientation.sign };
        s
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// (F(p) − c, ∇F(p)).
    pub fn value_grad<T: Field>(&self, p: &[T]) -> (T, Vec<T>) {
        let mut v = self.tape.eval(p);
        let f = v.remove(0) - T::cst(self.c);
        (f, v)
    }

    pub fn residual(&self, p: &[f64]) -> f64 {
        self.value_grad(p).0
    }

    /// Newton projection along ∇F onto {F = c}.
    pub fn project(&self, p: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let mut x = p.to_vec();
        let mut r = f64::INFINITY;
        for _ in 0..=max_iter {
            let (f, g) = self.value_grad(&x);
            r = f.abs();
            if r <= tol {
                return Ok(x);
            }
            let g2 = linalg::dot(&g, &g);
            if g2 == 0.0 || !g2.is_finite() {
                break;
            }
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi -= f * gi / g2;
            }
        }
        Err(Error::ProjectionFailed { iterations: max_iter, residual: r })
    }

    pub fn frame<T: Field>(&self, p: &[T]) -> Result<TangentFrame<T>> {
        let (_, n) = self.value_grad(p);
        Self::frame_from_normal(p, n, self.orientation)
    }

    pub fn frame_from_normal<T: Field>(p: &[T], n: Vec<T>, orientation: Orientation) -> Result<TangentFrame<T>> {
        let d = p.len();
        let mut jstar = 0;
        let mut best = -1.0;
        for (j, nj) in n.iter().enumerate() {
            if nj.re().abs() > best {
                best = nj.re().abs();
                jstar = j;
            }
        }
        if !(best > 0.0) || !best.is_finite() {
            return Err(Error::DegenerateFrame("dF vanishes; Σ is not a regular level set here".into()));
        }
        let mut n2 = T::zero();
        for x in &n {
            n2 += *x * *x;
        }
        let mut vectors = Vec::with_capacity(d - 1);
        for j in 0..d {
            if j == jstar {
                continue;
            }
            let c = n[j] / n2;
            let mut v: Vec<T> = n.iter().map(|x| -(c * *x)).collect();
            v[j] += T::one();
            vectors.push(v);
        }
        // det[N; v_1; …] = det[N; e_j (j ≠ j*)] = (−1)^{j*} N_{j*}
        let sign = if jstar % 2 == 0 { 1.0 } else { -1.0 } * orientation.sign as f64;
        let volume = n[jstar].scale(sign);
        Ok(TangentFrame { point: p.to_vec(), normal: n, vectors, volume, skipped: jstar })
    }
}

/// Gauss-Newton projection onto the common zero set of several functions
/// (minimum-norm steps).
pub fn project_constraints(fields: &Tape, targets: &[f64], p: &[f64], d: usize, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let m = targets.len();
    let mut x = p.to_vec();
    let mut res = f64::INFINITY;
    for _ in 0..=max_iter {
        let jet = fields.eval(&crate::numeric::Dual::seed(&x));
        let r: Vec<f64> = (0..m).map(|k| jet[k].v - targets[k]).collect();
        res = r.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if res <= tol {
            return Ok(x);
        }
        let mut jj = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                jj[a * m + b] = (0..d).map(|i| jet[a].d[i] * jet[b].d[i]).sum();
            }
        }
        let y = linalg::solve(jj, m, &r).map_err(|_| Error::DegenerateFrame("dependent constraints".into()))?;
        for i in 0..d {
            let step: f64 = (0..m).map(|a| jet[a].d[i] * y[a]).sum();
            x[i] -= step;
        }
    }
    Err(Error::ProjectionFailed { iterations: max_iter, residual: res })
}
