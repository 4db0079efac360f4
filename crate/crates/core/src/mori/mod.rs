//! The hypersurface Σ₀, its degenerate torus, and the column model of the
//! convexifying perturbation.

pub mod column;
pub mod dossier;
pub mod lemma;
pub mod scene;
pub mod torus;

pub use column::{build_perturbed, theta_bump, ColumnModel, ColumnOracle, PerturbationSpec};
pub use dossier::{perturb, reproduce, ModulusCheck, PerturbDossier, PortraitRow, ReproduceDossier};
pub use lemma::{angular_shift_residual, pushforward_zero, verify_foliation_lemma, LemmaReport, PushforwardZero};
pub use scene::{MoriConstants, MoriScene, ClosedFormVariant};
pub use torus::{degenerate_torus_probe, torus_constraints, torus_point, torus_probe, TorusReport};
