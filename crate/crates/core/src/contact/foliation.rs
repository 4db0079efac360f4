//! The characteristic foliation engine.
//!
//! At a point p of Σ = {F = c}, the frame v_j = e_j − (N_j/|N|²) N
//! (j ≠ argmax |N_j|, N = ∇F) spans TΣ and carries the volume
//! Ω = i_N(dx¹∧…∧dx^{2n+1}). With β = α|Σ, X is the unique solution of
//! i_X Ω = β∧(dβ)^{n−1}. Evaluated over [`Dual`] the same code returns DX.

use super::scene::ContactScene;
use super::surface::{Hypersurface, TangentFrame};
use crate::error::{Error, Result};
use crate::exterior::{solve_contraction, AltArray, ScalarField};
use crate::numeric::{linalg, Dual, Field, NumericPolicy};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct Foliation {
    pub scene: Arc<ContactScene>,
    pub surface: Arc<Hypersurface>,
    pub policy: NumericPolicy,
    /// Positive factor multiplying Ω (volume-independence checks).
    pub weight: Option<ScalarField>,
}

/// Everything computed at one point.
#[derive(Debug, Clone)]
pub struct Local<T> {
    /// Ambient components of X.
    pub x: Vec<T>,
    /// Components of X in the frame.
    pub x_frame: Vec<T>,
    pub frame: TangentFrame<T>,
    pub beta: AltArray<T>,
    pub dbeta: AltArray<T>,
    /// β∧(dβ)^{n−1}.
    pub eta: AltArray<T>,
    /// Ω on the frame.
    pub omega: T,
}

impl Foliation {
    pub fn new(scene: Arc<ContactScene>, surface: Arc<Hypersurface>, policy: NumericPolicy) -> Result<Self> {
        if !scene.chart.same_as(&surface.chart) {
            return Err(Error::ChartMismatch("scene and hypersurface use different charts".into()));
        }
        Ok(Foliation { scene, surface, policy, weight: None })
    }

    pub fn with_weight(mut self, w: ScalarField) -> Self {
        self.weight = Some(w);
        self
    }

    /// The same foliation with the opposite co-orientation (X ↦ −X).
    pub fn reversed(&self) -> Self {
        Foliation { surface: Arc::new(self.surface.reversed()), ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.scene.dim()
    }

    pub fn n(&self) -> usize {
        self.scene.n
    }

    pub fn local<T: Field>(&self, p: &[T]) -> Result<Local<T>> {
        let frame = self.surface.frame(p)?;
        let alpha = self.scene.alpha_at(p);
        let dalpha = self.scene.dalpha_at(p);
        let beta = alpha.restrict(&frame.vectors);
        let dbeta = dalpha.restrict(&frame.vectors);
        let eta = beta.wedge(&dbeta.power(self.n() - 1));
        let mut omega = frame.volume;
        if let Some(w) = &self.weight {
            omega *= w.eval(p);
        }
        let m = frame.vectors.len();
        let x_frame = solve_contraction(&AltArray::top(m, omega), &eta, self.policy.max_condition)?;
        let d = self.dim();
        let mut x = vec![T::zero(); d];
        for (k, v) in frame.vectors.iter().enumerate() {
            for i in 0..d {
                x[i] += x_frame[k] * v[i];
            }
        }
        Ok(Local { x, x_frame, frame, beta, dbeta, eta, omega })
    }

    /// X at p (the ambient extension: p need not lie exactly on Σ).
    pub fn field(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.local(p)?.x)
    }

    /// X and its ambient Jacobian, DX[i*d + j] = ∂_j X^i.
    pub fn jet(&self, p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.dim();
        let l = self.local(&Dual::seed(p))?;
        let x = l.x.iter().map(|v| v.v).collect();
        let mut dx = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                dx[i * d + j] = l.x[i].d[j];
            }
        }
        Ok((x, dx))
    }

    /// div_Ω X = (dβ)ⁿ / Ω, from first jets only.
    pub fn divergence(&self, p: &[f64]) -> Result<f64> {
        let l = self.local(p)?;
        let top = l.dbeta.power(self.n());
        Ok(top.c[0] / l.omega)
    }

    /// Second route: tr DX + X·∇ log|∇F|², valid for the unweighted Ω.
    pub fn divergence_trace(&self, p: &[f64]) -> Result<f64> {
        let d = self.dim();
        let (x, dx) = self.jet(p)?;
        let (_, g) = self.surface.value_grad(&Dual::seed(p));
        let g2: f64 = g.iter().map(|v| v.v * v.v).sum();
        let mut dg2 = vec![0.0; d];
        for gi in &g {
            for j in 0..d {
                dg2[j] += 2.0 * gi.v * gi.d[j];
            }
        }
        let tr: f64 = (0..d).map(|i| dx[i * d + i]).sum();
        Ok(tr + linalg::dot(&x, &dg2) / g2)
    }

    /// g with i_X dβ = g·β on TΣ.
    pub fn conformal_rate(&self, p: &[f64]) -> Result<f64> {
        let l = self.local(p)?;
        let ixdb = l.dbeta.interior(&l.x_frame)?;
        let bb: f64 = l.beta.c.iter().map(|b| b * b).sum();
        if bb == 0.0 {
            return Err(Error::Invalid("β vanishes; conformal rate undefined".into()));
        }
        Ok(linalg::dot(&ixdb.c, &l.beta.c) / bb)
    }

    /// X, optionally DX, the conformal rate g and div_Ω X in one pass.
    pub fn sample(&self, p: &[f64], want_jet: bool) -> Result<Sample> {
        let d = self.dim();
        let (x, dx, beta, dbeta, xf, omega) = if want_jet {
            let l = self.local(&Dual::seed(p))?;
            let mut dx = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    dx[i * d + j] = l.x[i].d[j];
                }
            }
            let x: Vec<f64> = l.x.iter().map(|v| v.v).collect();
            let xf: Vec<f64> = l.x_frame.iter().map(|v| v.v).collect();
            (x, Some(dx), l.beta.re(), l.dbeta.re(), xf, l.omega.v)
        } else {
            let l = self.local(p)?;
            (l.x, None, l.beta, l.dbeta, l.x_frame, l.omega)
        };
        let div = dbeta.power(self.n()).c[0] / omega;
        let bb: f64 = beta.c.iter().map(|b| b * b).sum();
        let g = if bb > 0.0 { linalg::dot(&dbeta.interior(&xf)?.c, &beta.c) / bb } else { 0.0 };
        Ok(Sample { x, dx, g, div })
    }

    /// Relative residual of i_X Ω = η at a computed point.
    pub fn contraction_residual(l: &Local<f64>) -> f64 {
        let m = l.frame.vectors.len();
        let lhs = AltArray::top(m, l.omega).interior(&l.x_frame).expect("top degree ≥ 1");
        let scale = l.eta.max_abs().max(l.omega.abs() * l.x_frame.iter().fold(0.0f64, |a, b| a.max(b.abs())));
        if scale == 0.0 {
            return 0.0;
        }
        lhs.sub(&l.eta).max_abs() / scale
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub x: Vec<f64>,
    pub dx: Option<Vec<f64>>,
    pub g: f64,
    pub div: f64,
}

/// X(p) for p on Σ. Off-surface points are rejected; call
/// [`Hypersurface::project`] first.
pub fn char_foliation_at(fol: &Foliation, p: &[f64]) -> Result<Vec<f64>> {
    let r = fol.surface.residual(p);
    let (_, g) = fol.surface.value_grad(p);
    let scale = linalg::norm(&g).max(1.0);
    if r.abs() > fol.policy.on_surface * scale {
        return Err(Error::OffSurface { residual: r.abs() });
    }
    let l = fol.local(p)?;
    let res = Foliation::contraction_residual(&l);
    if res > fol.policy.linear_solve {
        return Err(Error::DegenerateVolume { ratio: res });
    }
    Ok(l.x)
}

/// Angle between two vectors, robust for tiny angles.
pub fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let na = linalg::norm(a);
    let nb = linalg::norm(b);
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 0.0 } else { std::f64::consts::PI };
    }
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x / na - y / nb).powi(2)).sum::<f64>().sqrt();
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x / na + y / nb).powi(2)).sum::<f64>().sqrt();
    2.0 * diff.atan2(sum)
}
