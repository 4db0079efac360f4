//! The single record of numeric tolerances used across the crate.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Strict,
    Default,
    Fast,
}

impl std::str::FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "strict" => Ok(Profile::Strict),
            "default" => Ok(Profile::Default),
            "fast" => Ok(Profile::Fast),
            other => Err(format!("unknown tolerance profile `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumericPolicy {
    pub profile: Profile,
    /// Relative residual accepted from dense linear solves.
    pub linear_solve: f64,
    /// Pivot ratio above which a frame volume is called degenerate.
    pub max_condition: f64,
    /// Pointwise algebraic/differential identity checks.
    pub identity_check: f64,
    /// Jets versus central differences.
    pub fd_cross_check: f64,
    /// Points farther than this from Σ are rejected without projection.
    pub on_surface: f64,
    pub projection_tol: f64,
    pub projection_max_iter: usize,
    pub ode_atol: f64,
    pub ode_rtol: f64,
    /// Tighter pair used for monodromy integrations.
    pub orbit_atol: f64,
    pub orbit_rtol: f64,
    /// Every eigenvalue modulus must lie outside [1 - band, 1 + band].
    pub hyperbolicity_band: f64,
    /// |Re μ| below this marks a zero non-hyperbolic.
    pub zero_axis_band: f64,
    pub zero_residual: f64,
    pub dedupe_radius: f64,
    pub newton_max_iter: usize,
    pub orbit_newton_tol: f64,
    /// Relative tolerance on det, pairing and C cross-checks.
    pub structure_check: f64,
    pub divergence_floor: f64,
}

impl NumericPolicy {
    pub fn new(profile: Profile) -> Self {
        let base = NumericPolicy {
            profile,
            linear_solve: 1e-10,
            max_condition: 1e12,
            identity_check: 1e-9,
            fd_cross_check: 1e-6,
            on_surface: 1e-9,
            projection_tol: 1e-12,
            projection_max_iter: 20,
            ode_atol: 1e-10,
            ode_rtol: 1e-9,
            orbit_atol: 1e-12,
            orbit_rtol: 1e-11,
            hyperbolicity_band: 1e-6,
            zero_axis_band: 1e-8,
            zero_residual: 1e-10,
            dedupe_radius: 1e-6,
            newton_max_iter: 40,
            orbit_newton_tol: 1e-10,
            structure_check: 1e-6,
            divergence_floor: 1e-10,
        };
        match profile {
            Profile::Default => base,
            Profile::Strict => NumericPolicy {
                ode_atol: 1e-12,
                ode_rtol: 1e-11,
                orbit_atol: 1e-13,
                orbit_rtol: 1e-12,
                ..base
            },
            Profile::Fast => NumericPolicy {
                ode_atol: 1e-8,
                ode_rtol: 1e-7,
                orbit_atol: 1e-10,
                orbit_rtol: 1e-9,
                structure_check: 1e-4,
                ..base
            },
        }
    }
}

impl Default for NumericPolicy {
    fn default() -> Self {
        NumericPolicy::new(Profile::Default)
    }
}
