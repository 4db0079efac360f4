//! Graph hypersurfaces {t = H} in a product model ℝ_t × S¹_θ × L with
//! α = t dθ + λ, where the foliation is directed by ∂θ − X_H.

use super::foliation::{angle_between, char_foliation_at, Foliation};
use super::scene::ContactScene;
use super::surface::Hypersurface;
use crate::error::{Error, Result};
use crate::exterior::ScalarField;
use crate::numeric::NumericPolicy;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize)]
pub struct GraphCheck {
    pub samples: usize,
    /// Largest angle between X and ∂θ − X_H.
    pub max_angle: f64,
    /// Every sample had X·(∂θ − X_H) > 0.
    pub positive: bool,
    pub worst_point: Vec<f64>,
}

impl GraphCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.positive && self.max_angle < tol
    }
}

/// ∂θ − X_H at p, with X_H the contact Hamiltonian field of H for α.
pub fn graph_direction(scene: &ContactScene, theta: usize, h: &ScalarField, p: &[f64]) -> Result<Vec<f64>> {
    let mut v = scene.hamiltonian(h, p)?;
    for x in v.iter_mut() {
        *x = -*x;
    }
    v[theta] += 1.0;
    Ok(v)
}

/// Compares the computed foliation on {t = H} with ∂θ − X_H at the given
/// points (each is first moved onto the graph by setting t = H).
pub fn graph_foliation_check(
    scene: Arc<ContactScene>,
    t: usize,
    theta: usize,
    h: &ScalarField,
    points: &[Vec<f64>],
    policy: &NumericPolicy,
) -> Result<GraphCheck> {
    if t == theta {
        return Err(Error::Invalid("t and θ must be different coordinates".into()));
    }
    if !scene.chart.is_angular(theta) {
        return Err(Error::Invalid(format!("`{}` must be angular", scene.chart.coords[theta].name)));
    }
    let surface = Arc::new(Hypersurface::graph(scene.chart.clone(), t, h.clone())?);
    let fol = Foliation::new(scene.clone(), surface, policy.clone())?;
    let mut out = GraphCheck { samples: 0, max_angle: 0.0, positive: true, worst_point: vec![] };
    for p in points {
        let mut q = p.clone();
        q[t] = h.eval(&q);
        let x = char_foliation_at(&fol, &q)?;
        let y = graph_direction(&scene, theta, h, &q)?;
        let a = angle_between(&x, &y);
        let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        if dot <= 0.0 {
            out.positive = false;
        }
        if a > out.max_angle || out.worst_point.is_empty() {
            out.max_angle = out.max_angle.max(a);
            out.worst_point = q.clone();
        }
        out.samples += 1;
    }
    Ok(out)
}
