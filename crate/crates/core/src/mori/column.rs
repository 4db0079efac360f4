//! The column model around P⁻¹(p) and its perturbation Σ₁ = {t = H}.
//!
//! Chart (t, θ, x, y, φ), α = t dθ + dφ + x dy, so that L = U × S¹ carries
//! λ = dφ + x dy with Reeb field ∂φ. The Hamiltonian is
//!
//! H = κ·x·y + δ·b(θ)·bump(x)·bump(y)·sin φ,
//!
//! where κxy produces the hyperbolic X̃-direction and the δ-term is the
//! height function on the L-circle, cut off by bumps in θ and in U.

use crate::contact::{ContactScene, Foliation, Hypersurface};
use crate::error::{Error, Result};
use crate::exterior::{Chart, ScalarField};
use crate::numeric::NumericPolicy;
use serde::Serialize;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PerturbationSpec {
    pub delta: f64,
    /// Saddle rate of the unperturbed column in the U-directions.
    pub kappa: f64,
    /// The θ-bump is supported where cos θ < cut.
    pub theta_cut: f64,
    /// Half-width of the U-window |x|, |y| < window.
    pub window: f64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec { delta: 0.05, kappa: 0.5, theta_cut: 0.0, window: 1.0 }
    }
}

/// Predictions for the two orbits x = y = 0, φ ∈ {0, π} from the scalar
/// variational equations along them.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ColumnOracle {
    /// ∫₀^{2π} b(θ) dθ.
    pub bump_integral: f64,
    /// C at φ = 0 and at φ = π.
    pub c_zero: f64,
    pub c_pi: f64,
    /// Multipliers in the x- and y-directions.
    pub x_zero: f64,
    pub x_pi: f64,
    pub y_multiplier: f64,
}

#[derive(Debug, Clone)]
pub struct ColumnModel {
    pub spec: PerturbationSpec,
    pub chart: Arc<Chart>,
    pub scene: Arc<ContactScene>,
    pub surface: Arc<Hypersurface>,
    pub h: ScalarField,
    /// The δ-part of H alone.
    pub perturbation: ScalarField,
    pub oracle: ColumnOracle,
    /// Sampled sup |H − κxy| and sup |d(H − κxy)|.
    pub sup_norm: f64,
    pub c1_norm: f64,
}

/// b(θ) = psi(cut − cos θ) / psi(cut + 1), which is 1 at θ = π.
pub fn theta_bump(theta: f64, cut: f64) -> f64 {
    let psi = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
    psi(cut - theta.cos()) / psi(cut + 1.0)
}

/// Periodic trapezoid rule, which converges spectrally for smooth periodic b.
fn bump_integral(cut: f64) -> f64 {
    let n = 4096;
    (0..n).map(|i| theta_bump(TAU * i as f64 / n as f64, cut)).sum::<f64>() * TAU / n as f64
}

pub fn build_perturbed(spec: PerturbationSpec, policy: NumericPolicy) -> Result<(ColumnModel, Foliation)> {
    if !(spec.delta >= 0.0 && spec.delta <= 0.1) {
        return Err(Error::Invalid(format!("δ must lie in [0, 0.1], got {}", spec.delta)));
    }
    if !(spec.kappa > 0.0) || !(spec.theta_cut > -1.0 && spec.theta_cut < 1.0) || !(spec.window > 0.0) {
        return Err(Error::Invalid("column parameters out of range".into()));
    }
    let chart = Arc::new(Chart::new(
        &[("t", false), ("theta", true), ("x", false), ("y", false), ("phi", true)],
        &[("delta", spec.delta), ("kappa", spec.kappa), ("cut", spec.theta_cut), ("w", spec.window)],
    )?);
    let scene = Arc::new(ContactScene::from_coefficients(chart.clone(), &["0", "t", "0", "x", "1"])?);
    let pert = chart.parse("delta * psi(cut - cos(theta)) / psi(cut + 1) * bump(x / w) * bump(y / w) * sin(phi)")?;
    let h = chart.parse("kappa * x * y")?.add(&pert);
    let surface = Arc::new(Hypersurface::graph(chart.clone(), 0, h.clone())?);
    let fol = Foliation::new(scene.clone(), surface.clone(), policy)?;
    let b = bump_integral(spec.theta_cut);
    let tk = TAU * spec.kappa;
    let oracle = ColumnOracle {
        bump_integral: b,
        c_zero: (-spec.delta * b).exp(),
        c_pi: (spec.delta * b).exp(),
        x_zero: (tk - spec.delta * b).exp(),
        x_pi: (tk + spec.delta * b).exp(),
        y_multiplier: (-tk).exp(),
    };
    let (sup, c1) = norms(&pert, &chart, spec.window);
    let model = ColumnModel { spec, chart, scene, surface, h, perturbation: pert, oracle, sup_norm: sup, c1_norm: c1 };
    Ok((model, fol))
}

fn norms(f: &ScalarField, chart: &Chart, w: f64) -> (f64, f64) {
    let grad = f.gradient(chart.dim());
    let k = 24;
    let (mut sup, mut c1) = (0.0f64, 0.0f64);
    for a in 0..k {
        for b in 0..k {
            for c in 0..8 {
                let th = TAU * a as f64 / k as f64;
                let x = w * (2.0 * (b as f64 + 0.5) / k as f64 - 1.0);
                let y = w * (2.0 * ((b * 7 + a) % k) as f64 / k as f64 - 1.0);
                let ph = TAU * c as f64 / 8.0 + 0.2;
                let p = [0.0, th, x, y, ph];
                sup = sup.max(f.eval(&p).abs());
                for g in &grad {
                    c1 = c1.max(g.eval(&p).abs());
                }
            }
        }
    }
    (sup, c1)
}

impl ColumnModel {
    /// Point of Σ₁ over (θ, x, y, φ).
    pub fn point(&self, theta: f64, x: f64, y: f64, phi: f64) -> Vec<f64> {
        let mut p = vec![0.0, theta, x, y, phi];
        p[0] = self.h.eval(&p);
        p
    }

    /// Inside the U-window.
    pub fn inside(&self, p: &[f64]) -> bool {
        p[2].abs() < self.spec.window && p[3].abs() < self.spec.window
    }

    /// Seeds near the two expected orbits on the section {sin θ = 0}.
    pub fn orbit_seeds(&self) -> [Vec<f64>; 2] {
        [self.point(0.0, 0.02, -0.02, 0.1), self.point(0.0, -0.02, 0.02, PI - 0.1)]
    }
}
