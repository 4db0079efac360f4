//! Morse-Smale certificates and the collar convexity profile.

pub mod morse;
pub mod profile;

pub use morse::{
    certify_elements, check_morse_smale, find_elements, time_reversal_violations, CertifyOptions, Connection,
    DimensionCount, ElementSeeds, LimitCheck, MorseSmaleCertificate, OrbitSeed, ProbeSeed, SampleRegion, Verdict,
};
pub use profile::{
    build_profile, midpoint_grid, verify_convex_form, BoundaryGerm, ConvexFormReport, ConvexityProfile, GammaScene,
    ProfileRow, ProfileSweep,
};
