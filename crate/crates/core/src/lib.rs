//! Sublinear expectations of G-Brownian functionals.
//!
//! Two independent backends compute `E[phi(B_t)]`: an explicit finite-difference
//! solver for the G-heat equation ([`pde`]) and an adversarial-volatility
//! lattice with exact backward induction ([`lattice`]). On top sit a discrete
//! stochastic calculus ([`calculus`]) and executable theorem checks ([`verify`]).

pub mod calculus;
pub mod error;
pub mod lattice;
pub mod params;
pub mod payoff;
pub mod pde;
pub mod scenario;
pub mod verify;

pub use calculus::{
    g_compensated, integrate_qv, ito_integral, mg_norm, quadratic_variation, IncreasingProcess, IncreasingSpec,
    NormBackend, StepProcess,
};
pub use error::{Error, Result};
pub use lattice::{
    build_lattice, conditional_expect, extract_worst_policy, lattice_expect, sample_paths, CylinderFunctional,
    IncrementMode, Lattice, PathEnsemble, VolatilityPolicy,
};
pub use params::{g_eval, GParams};
pub use payoff::{check_lip_poly, LipschitzCertificate, PayoffExpr};
pub use pde::{gnormal_expect, solve_gheat, Grid1D, GridFunction};
pub use scenario::{capacity_estimate, lower_expect, sublinear_expect, sublinear_expect_neg, ScenarioFamily};
