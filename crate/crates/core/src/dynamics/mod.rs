//! Flows on Σ, zeros and closed orbits, and their classification.

pub mod element;
pub mod integrate;
pub mod orbit;
pub mod recurrence;
pub mod zeros;

pub use element::{sign_of, Check, CriticalElement, Kind};
pub use integrate::{FieldSection, Flow, FlowOptions, Hyperplane, Outcome, Reversed, Run, Section, Stop};
pub use orbit::{
    adapted_basis, analyze_chain, chain_spectrum, classify_orbit, find_orbit, project_on_section, Block, OrbitOptions,
    ReturnMapAnalysis, StructureResiduals,
};
pub use recurrence::{probe_recurrence, RecurrenceProbe, RecurrenceReport};
pub use zeros::{find_zeros, linearize_zero, refine_zero, tangent_jacobian, ZeroSearch};

use crate::contact::Foliation;
use crate::error::Result;
use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DivergenceSample {
    pub value: f64,
    /// −1, 0 or +1; 0 when |value| is below the floor.
    pub sign: i8,
}

/// div_Ω X at p with its sign (undetermined below the policy floor).
pub fn divergence_at(fol: &Foliation, p: &[f64]) -> Result<DivergenceSample> {
    let value = fol.divergence(p)?;
    Ok(DivergenceSample { value, sign: sign_of(value, fol.policy.divergence_floor) })
}
