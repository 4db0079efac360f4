//! Jets, dense linear algebra and the numeric policy.

pub mod jet;
pub mod linalg;
pub mod policy;

pub use jet::{Dual, Field, MAX_DIM};
pub use policy::{NumericPolicy, Profile};
