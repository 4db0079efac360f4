//! Critical elements (zeros and closed orbits) and their classification.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Zero,
    Orbit,
}

/// A named residual with the tolerance it was judged against.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, tolerance, passed: value.is_finite() && value < tolerance }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Check { name: name.into(), value: if ok { 0.0 } else { 1.0 }, tolerance: 0.5, passed: ok }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalElement {
    pub kind: Kind,
    /// The zero, or the fixed point of the return map.
    pub location: Vec<f64>,
    pub period: Option<f64>,
    /// Linearization eigenvalues (zeros) or return-map multipliers (orbits), as (re, im).
    pub eigenvalues: Vec<[f64; 2]>,
    pub hyperbolic: bool,
    /// Distance of the spectrum from the imaginary axis / unit circle.
    pub margin: f64,
    /// Liouville sign: +1, −1, or 0 when undetermined.
    pub sign: i8,
    pub stable_index: usize,
    pub unstable_index: usize,
    /// The multiplier C of the return map (orbits only).
    pub c: Option<f64>,
    pub log_c: Option<f64>,
    /// Divergence at the zero, or its mean along the orbit.
    pub divergence: f64,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    /// Points along the orbit (or just the zero).
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
    /// Ambient tangent vectors spanning the unstable directions at `location`.
    #[serde(skip)]
    pub unstable_directions: Vec<Vec<f64>>,
    #[serde(skip)]
    pub stable_directions: Vec<Vec<f64>>,
}

impl CriticalElement {
    pub fn checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Distance from p to the element (to the nearest orbit sample).
    pub fn distance(&self, chart: &crate::exterior::Chart, p: &[f64]) -> f64 {
        let mut best = chart.distance(&self.location, p);
        for (a, b) in self.samples.iter().zip(self.samples.iter().skip(1)) {
            best = best.min(segment_distance(chart, a, b, p));
        }
        best
    }

    /// The same element seen by the time-reversed field.
    pub fn reversed(&self) -> Self {
        let mut e = self.clone();
        e.sign = -self.sign;
        std::mem::swap(&mut e.stable_index, &mut e.unstable_index);
        std::mem::swap(&mut e.stable_directions, &mut e.unstable_directions);
        e.divergence = -self.divergence;
        match self.kind {
            Kind::Zero => {
                for ev in &mut e.eigenvalues {
                    ev[0] = -ev[0];
                    ev[1] = -ev[1];
                }
            }
            Kind::Orbit => {
                for ev in &mut e.eigenvalues {
                    let m2 = ev[0] * ev[0] + ev[1] * ev[1];
                    *ev = [ev[0] / m2, -ev[1] / m2];
                }
                e.c = self.c.map(|c| 1.0 / c);
                e.log_c = self.log_c.map(|l| -l);
            }
        }
        e
    }
}

fn segment_distance(chart: &crate::exterior::Chart, a: &[f64], b: &[f64], p: &[f64]) -> f64 {
    let ab = chart.delta(a, b);
    let ap = chart.delta(a, p);
    let l2: f64 = ab.iter().map(|x| x * x).sum();
    let t = if l2 > 0.0 { (ap.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / l2).clamp(0.0, 1.0) } else { 0.0 };
    ap.iter().zip(&ab).map(|(x, y)| (x - t * y).powi(2)).sum::<f64>().sqrt()
}

/// Sign with a dead zone.
pub fn sign_of(x: f64, floor: f64) -> i8 {
    if x > floor {
        1
    } else if x < -floor {
        -1
    } else {
        0
    }
}
