//! Characteristic foliations of hypersurfaces in contact manifolds.
//!
//! The crate computes the characteristic foliation of a hypersurface Σ in a
//! contact manifold (M, ker α), finds and classifies its zeros and closed
//! orbits, checks the Morse-Smale property, builds the collar convexity
//! profile, and reproduces the analysis of Mori's non-convex sphere.
//!
//! Modules, bottom up:
//!
//! - [`numeric`]: dual-number jets, dense solves, the tolerance record.
//! - [`exterior`]: expression fields, forms, contraction solves.
//! - [`contact`]: scenes, hypersurfaces, the foliation engine, Reeb and
//!   contact Hamiltonian fields.
//! - [`dynamics`]: integration on Σ, zeros, closed orbits, classification.
//! - [`certify`]: Morse-Smale certificates and convexity profiles.
//! - [`mori`]: the built-in Σ₀ and column-model scenes.
//! - [`cli`]: scene files, reports and the command-line front end.

pub mod error;
pub mod numeric;
pub mod exterior;
pub mod contact;
pub mod dynamics;
pub mod certify;
pub mod mori;
pub mod cli;

pub use error::{Error, Result};
