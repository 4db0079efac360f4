//! Pointwise exterior calculus over expression-tree scalar fields.

pub mod chart;
pub mod expr;
pub mod form;

pub use chart::{Chart, Coord};
pub use expr::{NameTable, ScalarField, Symbols, Tape};
pub use form::{restrict_at, solve_contraction, AltArray, FormTape, KForm, VectorFieldExpr};
