//! The hypersurface Σ₀ in its polar and Cartesian charts.

use crate::contact::{ContactScene, Foliation, Hypersurface};
use crate::error::{Error, Result};
use crate::exterior::Chart;
use crate::numeric::{Field, NumericPolicy};
use rand::Rng;
use serde::Serialize;
use std::sync::Arc;

/// Constants of Σ₀ that have closed forms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MoriConstants {
    /// Hyperbolic zero of the pushforward at z = 0.
    pub r_star: f64,
    pub rho_star: f64,
    /// Axis zeros sit at z = ±zero_z.
    pub zero_z: f64,
    /// Boundary orbits sit at z = ±orbit_z, r = 1.
    pub orbit_z: f64,
    /// φ-speed over θ-speed on the torus over p.
    pub torus_slope: f64,
}

impl MoriConstants {
    pub fn new(eps: f64) -> Self {
        let r2 = 1.0 + eps - (eps * (1.0 + eps)).sqrt();
        let slope = (2.0 * r2 * r2 - 2.0 * r2 + 1.0) / (eps * eps * (1.0 + 2.0 * eps));
        MoriConstants {
            r_star: r2.sqrt(),
            rho_star: eps * (1.0 + eps - r2).sqrt(),
            zero_z: eps * (1.0 + eps).sqrt(),
            orbit_z: eps.powf(1.5),
            torus_slope: slope,
        }
    }
}

/// Which ∂ρᵢ coefficient the closed-form field uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosedFormVariant {
    /// ∂ρᵢ coefficient ε⁻²(2r²−1)z·ρᵢ, tangent to Σ₀.
    Corrected,
    /// ∂ρᵢ coefficient ε⁻²(2r²−1)z without the ρᵢ factor, not tangent to Σ₀.
    Unscaled,
}

#[derive(Debug, Clone)]
pub struct MoriScene {
    pub n: usize,
    pub eps: f64,
    pub constants: MoriConstants,
    pub polar: Arc<Chart>,
    pub cartesian: Arc<Chart>,
    pub polar_scene: Arc<ContactScene>,
    pub cartesian_scene: Arc<ContactScene>,
    pub polar_surface: Arc<Hypersurface>,
    pub cartesian_surface: Arc<Hypersurface>,
    pub warnings: Vec<String>,
    /// Smallest r and ρᵢ accepted by the polar formulas.
    pub r_min: f64,
    pub rho_min: f64,
}

impl MoriScene {
    pub fn new(n: usize, eps: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Invalid(format!("Σ₀ needs n ≥ 2, got {n}")));
        }
        if !(eps > 0.0 && eps <= 0.3) {
            return Err(Error::Invalid(format!("ε must lie in (0, 0.3], got {eps}")));
        }
        let mut warnings = Vec::new();
        if eps > 0.15 {
            warnings.push(format!("ε = {eps} is above 0.15; the small-ε picture may not apply"));
        }
        let m = n - 1;
        let mut pc: Vec<(String, bool)> = vec![("z".into(), false), ("r".into(), false), ("theta".into(), true)];
        let mut cc: Vec<(String, bool)> = vec![("z".into(), false), ("x".into(), false), ("y".into(), false)];
        for i in 1..=m {
            pc.push((format!("rho{i}"), false));
            pc.push((format!("phi{i}"), true));
            cc.push((format!("u{i}"), false));
            cc.push((format!("v{i}"), false));
        }
        let mk = |c: &[(String, bool)]| -> Result<Arc<Chart>> {
            let refs: Vec<(&str, bool)> = c.iter().map(|(a, b)| (a.as_str(), *b)).collect();
            Ok(Arc::new(Chart::new(&refs, &[("eps", eps)])?))
        };
        let polar = mk(&pc)?;
        let cartesian = mk(&cc)?;

        let mut pa = vec!["2*r^2 - 1".to_string(), "0".into(), "r^2*(r^2 - 1)".into()];
        let mut ca = vec!["2*(x^2 + y^2) - 1".to_string(), "-(x^2 + y^2 - 1)*y".into(), "(x^2 + y^2 - 1)*x".into()];
        let mut prho = String::from("z^2");
        let mut crho = String::from("z^2");
        for i in 1..=m {
            pa.push("0".into());
            pa.push(format!("rho{i}^2"));
            ca.push(format!("-v{i}"));
            ca.push(format!("u{i}"));
            prho.push_str(&format!(" + rho{i}^2"));
            crho.push_str(&format!(" + u{i}^2 + v{i}^2"));
        }
        fn refs(v: &[String]) -> Vec<&str> {
            v.iter().map(|s| s.as_str()).collect()
        }
        let polar_scene = Arc::new(ContactScene::from_coefficients(polar.clone(), &refs(&pa))?);
        let cartesian_scene = Arc::new(ContactScene::from_coefficients(cartesian.clone(), &refs(&ca))?);
        let pf = polar.parse(&format!("r^2 + ({prho})/eps^2"))?;
        let cf = cartesian.parse(&format!("x^2 + y^2 + ({crho})/eps^2"))?;
        let polar_surface = Arc::new(Hypersurface::level_set(polar.clone(), pf, 1.0 + eps)?);
        let cartesian_surface = Arc::new(Hypersurface::level_set(cartesian.clone(), cf, 1.0 + eps)?);
        Ok(MoriScene {
            n,
            eps,
            constants: MoriConstants::new(eps),
            polar,
            cartesian,
            polar_scene,
            cartesian_scene,
            polar_surface,
            cartesian_surface,
            warnings,
            r_min: 0.05,
            rho_min: 0.05,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn polar_foliation(&self, policy: NumericPolicy) -> Result<Foliation> {
        Foliation::new(self.polar_scene.clone(), self.polar_surface.clone(), policy)
    }

    pub fn cartesian_foliation(&self, policy: NumericPolicy) -> Result<Foliation> {
        Foliation::new(self.cartesian_scene.clone(), self.cartesian_surface.clone(), policy)
    }

    /// (z, r, θ, ρᵢ, φᵢ) → (z, x, y, uᵢ, vᵢ).
    pub fn to_cartesian(&self, p: &[f64]) -> Vec<f64> {
        let mut q = vec![p[0], p[1] * p[2].cos(), p[1] * p[2].sin()];
        for i in 0..self.n - 1 {
            let (rho, phi) = (p[3 + 2 * i], p[4 + 2 * i]);
            q.push(rho * phi.cos());
            q.push(rho * phi.sin());
        }
        q
    }

    pub fn to_polar(&self, q: &[f64]) -> Vec<f64> {
        let mut p = vec![q[0], q[1].hypot(q[2]), q[2].atan2(q[1]).rem_euclid(std::f64::consts::TAU)];
        for i in 0..self.n - 1 {
            let (u, v) = (q[3 + 2 * i], q[4 + 2 * i]);
            p.push(u.hypot(v));
            p.push(v.atan2(u).rem_euclid(std::f64::consts::TAU));
        }
        p
    }

    /// Pushes a polar tangent vector at p to Cartesian components.
    pub fn polar_vector_to_cartesian(&self, p: &[f64], v: &[f64]) -> Vec<f64> {
        let (r, th) = (p[1], p[2]);
        let mut w = vec![v[0], v[1] * th.cos() - r * th.sin() * v[2], v[1] * th.sin() + r * th.cos() * v[2]];
        for i in 0..self.n - 1 {
            let (rho, phi) = (p[3 + 2 * i], p[4 + 2 * i]);
            let (dr, dp) = (v[3 + 2 * i], v[4 + 2 * i]);
            w.push(dr * phi.cos() - rho * phi.sin() * dp);
            w.push(dr * phi.sin() + rho * phi.cos() * dp);
        }
        w
    }

    /// Σ₀ point with polar data (z, r, θ, ρᵢ, φᵢ) given all but z's sign-free magnitude.
    pub fn polar_point(&self, r: f64, theta: f64, rho: &[f64], phi: &[f64], z_sign: f64) -> Result<Vec<f64>> {
        let e2 = self.eps * self.eps;
        let z2 = e2 * (1.0 + self.eps - r * r) - rho.iter().map(|x| x * x).sum::<f64>();
        if z2 < 0.0 {
            return Err(Error::Invalid("no point of Σ₀ with these r, ρ".into()));
        }
        let mut p = vec![z_sign.signum() * z2.sqrt(), r, theta];
        for i in 0..self.n - 1 {
            p.push(rho[i]);
            p.push(phi[i]);
        }
        Ok(p)
    }

    /// Uniformly drawn angles; (r, direction in the (z, ρ) block) drawn so
    /// that r and every ρᵢ exceed the polar-regular minimum.
    pub fn sample_polar_regular<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.n - 1;
        let top = (1.0 + self.eps).sqrt();
        loop {
            let r = rng.gen_range(self.r_min..top);
            let big = self.eps * (1.0 + self.eps - r * r).max(0.0).sqrt();
            let mut w: Vec<f64> = (0..=m).map(|_| rng.gen_range(-1.0..1.0f64)).collect();
            let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(wn > 1e-3 && wn <= 1.0) {
                continue;
            }
            w.iter_mut().for_each(|x| *x = *x / wn * big);
            let rho: Vec<f64> = w[1..].iter().map(|x| x.abs()).collect();
            if r <= self.r_min || rho.iter().any(|x| *x <= self.rho_min) {
                continue;
            }
            let tau = std::f64::consts::TAU;
            let mut p = vec![w[0], r, rng.gen_range(0.0..tau)];
            for &rh in &rho {
                p.push(rh);
                p.push(rng.gen_range(0.0..tau));
            }
            return p;
        }
    }

    fn check_polar_regular(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::ChartMismatch(format!("expected {} polar coordinates", self.dim())));
        }
        if !(p[1] > self.r_min) {
            return Err(Error::PolarDegenerate(format!("r = {} ≤ {}", p[1], self.r_min)));
        }
        for i in 0..self.n - 1 {
            let rho = p[3 + 2 * i];
            if !(rho > self.rho_min) {
                return Err(Error::PolarDegenerate(format!("rho{} = {} ≤ {}", i + 1, rho, self.rho_min)));
            }
        }
        let res = self.polar_surface.residual(p);
        if res.abs() > 1e-9 {
            return Err(Error::OffSurface { residual: res.abs() });
        }
        Ok(())
    }

    /// The closed-form foliation field in polar components.
    pub fn closed_form_field(&self, p: &[f64], variant: ClosedFormVariant) -> Result<Vec<f64>> {
        self.check_polar_regular(p)?;
        Ok(self.closed_form_field_unchecked(p, variant))
    }

    pub fn closed_form_field_unchecked(&self, p: &[f64], variant: ClosedFormVariant) -> Vec<f64> {
        let e = self.eps;
        let ie2 = 1.0 / (e * e);
        let (z, r) = (p[0], p[1]);
        let r2 = r * r;
        let mut x = vec![
            (r2 - 1.0).powi(2) + (2.0 * r2 - 1.0) * (ie2 * z * z - e),
            ie2 * r * (r2 - 1.0) * z,
            1.0 + 2.0 * e - 2.0 * ie2 * z * z,
        ];
        for i in 0..self.n - 1 {
            let rho = p[3 + 2 * i];
            let base = ie2 * (2.0 * r2 - 1.0) * z;
            x.push(match variant {
                ClosedFormVariant::Corrected => base * rho,
                ClosedFormVariant::Unscaled => base,
            });
            x.push(ie2 * (2.0 * r2 * r2 - 2.0 * r2 + 1.0));
        }
        x
    }

    /// X̃ on the quarter ellipsoid at (z, r, ρ).
    pub fn pushforward_field<T: Field>(&self, q: &[T], variant: ClosedFormVariant) -> [T; 3] {
        let e = T::cst(self.eps);
        let ie2 = T::cst(1.0 / (self.eps * self.eps));
        let one = T::cst(1.0);
        let two = T::cst(2.0);
        let (z, r, rho) = (q[0], q[1], q[2]);
        let r2 = r * r;
        let zc = (r2 - one) * (r2 - one) + (two * r2 - one) * (ie2 * z * z - e);
        let rc = ie2 * r * (r2 - one) * z;
        let base = ie2 * (two * r2 - one) * z;
        let pc = match variant {
            ClosedFormVariant::Corrected => base * rho,
            ClosedFormVariant::Unscaled => base * T::cst(((self.n - 1) as f64).sqrt()),
        };
        [zc, rc, pc]
    }

    /// r² + ε⁻²(z² + ρ²) − (1 + ε) on (z, r, ρ).
    pub fn ellipsoid<T: Field>(&self, q: &[T]) -> T {
        let ie2 = T::cst(1.0 / (self.eps * self.eps));
        q[1] * q[1] + ie2 * (q[0] * q[0] + q[2] * q[2]) - T::cst(1.0 + self.eps)
    }
}
