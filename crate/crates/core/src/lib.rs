//! Diagonal implicit symplectic exponential RKN methods for oscillatory
//! Hamiltonian systems `q'' + M q = -grad U(q)`.

pub mod error;
pub mod integrator;
pub mod jet;
pub mod measure;
pub mod phi;
pub mod problems;
pub mod spectral;
pub mod stability;
pub mod tableau;
pub mod verification;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use integrator::{
    integrate, integrate_observed, step, Potential, Problem, Reference, RunSummary, SolveSettings,
    State, StepStats, Stepper, Trajectory, ZeroPotential,
};
pub use jet::Jet;
pub use phi::{phi_all, phi_scalar, Phi, Scalar, ScalarAnalyticFn};
pub use spectral::{apply_analytic, spectral_decompose, SpectralCache};
pub use tableau::{
    coefficient_ids, taylor_coefficients, CoefficientId, CoefficientKind, Coefficients, MethodTableau,
    OneStageVariant, METHOD_NAMES, SERKN_NAMES,
};
