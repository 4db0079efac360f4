//! Checks of the closed-form field and its pushforward against the engine.

use super::scene::{MoriScene, ClosedFormVariant};
use crate::contact::angle_between;
use crate::error::{Error, Result};
use crate::numeric::{linalg, Dual, NumericPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub samples: usize,
    pub variant: ClosedFormVariant,
    /// Component flipped in sign before comparing (a mutation run).
    pub flipped: Option<usize>,
    pub max_angle: f64,
    pub worst_point: Vec<f64>,
    /// |X_engine| / |X_closed| over the samples.
    pub factor_min: f64,
    pub factor_max: f64,
    pub antiparallel: usize,
    pub passed: bool,
    pub tolerance: f64,
}

/// Compares the engine with the closed-form field at random polar-regular points.
pub fn verify_foliation_lemma(
    scene: &MoriScene,
    samples: usize,
    seed: u64,
    variant: ClosedFormVariant,
    flip: Option<usize>,
) -> Result<LemmaReport> {
    let fol = scene.polar_foliation(NumericPolicy::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = 1e-8;
    let mut max_angle = 0.0f64;
    let mut worst = Vec::new();
    let mut fmin = f64::INFINITY;
    let mut fmax = 0.0f64;
    let mut anti = 0;
    for _ in 0..samples {
        let p = scene.sample_polar_regular(&mut rng);
        let x = fol.field(&p)?;
        let mut y = scene.closed_form_field(&p, variant)?;
        if let Some(k) = flip {
            if k >= y.len() {
                return Err(Error::Invalid(format!("component {k} out of range")));
            }
            y[k] = -y[k];
        }
        let a = angle_between(&x, &y);
        if a > max_angle || worst.is_empty() {
            max_angle = max_angle.max(a);
            worst = p.clone();
        }
        if linalg::dot(&x, &y) <= 0.0 {
            anti += 1;
        }
        let f = linalg::norm(&x) / linalg::norm(&y);
        fmin = fmin.min(f);
        fmax = fmax.max(f);
    }
    Ok(LemmaReport {
        samples,
        variant,
        flipped: flip,
        max_angle,
        worst_point: worst,
        factor_min: fmin,
        factor_max: fmax,
        antiparallel: anti,
        passed: anti == 0 && max_angle < tol,
        tolerance: tol,
    })
}

/// Largest relative change of the engine field (polar components) under
/// shifts of θ and the φᵢ at fixed (z, r, ρ).
pub fn angular_shift_residual(scene: &MoriScene, p: &[f64], shifts: &[f64]) -> Result<f64> {
    let fol = scene.polar_foliation(NumericPolicy::default())?;
    let x0 = fol.field(p)?;
    let n0 = linalg::norm(&x0);
    let mut q = p.to_vec();
    q[2] += shifts[0];
    for i in 0..scene.n - 1 {
        q[4 + 2 * i] += shifts.get(1 + i).copied().unwrap_or(shifts[0]);
    }
    let x1 = fol.field(&scene.polar.wrap(&q))?;
    Ok(x0.iter().zip(&x1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / n0)
}

#[derive(Debug, Clone, Serialize)]
pub struct PushforwardZero {
    /// (z, r, ρ).
    pub point: [f64; 3],
    pub residual: f64,
    /// Eigenvalues of the linearization on the ellipsoid tangent plane.
    pub eigenvalues: Vec<[f64; 2]>,
    pub saddle: bool,
}

/// Gauss-Newton on (X̃, ellipsoid) = 0 from a seed in (z, r, ρ).
pub fn pushforward_zero(scene: &MoriScene, seed: [f64; 3], variant: ClosedFormVariant) -> Result<PushforwardZero> {
    let mut q = seed.to_vec();
    let eval = |q: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let d = Dual::seed(q);
        let x = scene.pushforward_field(&d, variant);
        let g = scene.ellipsoid(&d);
        let rows = [x[0], x[1], x[2], g];
        (rows.iter().map(|v| v.v).collect(), rows.iter().flat_map(|v| v.d[..3].to_vec()).collect())
    };
    let mut res = f64::INFINITY;
    for _ in 0..100 {
        let (r, j) = eval(&q);
        res = r.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if res < 1e-14 {
            break;
        }
        let step = linalg::pinv_solve(&j, 4, 3, &r);
        let sn = linalg::norm(&step);
        let sc = if sn > 0.05 { 0.05 / sn } else { 1.0 };
        for i in 0..3 {
            q[i] -= sc * step[i];
        }
        if sn < 1e-16 {
            break;
        }
    }
    if res > 1e-10 {
        return Err(Error::NoOrbit(format!("pushforward zero search stalled at residual {res:e}")));
    }
    // linearization restricted to the tangent plane of the ellipsoid
    let d = Dual::seed(&q);
    let x = scene.pushforward_field(&d, variant);
    let g = scene.ellipsoid(&d);
    let jac: Vec<f64> = x.iter().flat_map(|v| v.d[..3].to_vec()).collect();
    let b = linalg::complement_basis(&[g.d[..3].to_vec()], 3);
    let mut a = vec![0.0; 4];
    for (c, bc) in b.iter().enumerate() {
        let img = linalg::matmul(&jac, bc, 3, 3, 1);
        for (r, br) in b.iter().enumerate() {
            a[r * 2 + c] = linalg::dot(br, &img);
        }
    }
    let ev = linalg::eigenvalues(&a, 2);
    let saddle = ev.iter().all(|z| z.im.abs() < 1e-12) && ev[0].re * ev[1].re < 0.0;
    Ok(PushforwardZero {
        point: [q[0], q[1], q[2]],
        residual: res,
        eigenvalues: ev.iter().map(|z| [z.re, z.im]).collect(),
        saddle,
    })
}
