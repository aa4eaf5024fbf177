//! Coupling-of-noise experiments for scalar SDEs with discontinuous drift.
//!
//! The crate builds piecewise-polynomial models ([`SdeModel`]), the
//! transforms that remove drift jumps or normalize the diffusion, Brownian
//! lattices with bridge couplings, pathwise schemes, and the Monte Carlo
//! estimators that measure coupling distances and convergence rates.

pub mod adaptive;
pub mod coefficients;
pub mod couplings;
pub mod error;
pub mod estimation;
pub mod noise;
pub mod poly;
pub mod quadrature;
pub mod rng;
pub mod solvers;
pub mod transforms;

mod parallel;

pub use coefficients::{
    jump_height, localize_model, validate_assumptions, AssumptionReport, Coefficient, Dynamics,
    LocalCoefficients, LocalizationRadii, SdeModel, Side,
};
pub use couplings::{CouplingExperimentConfig, DistanceEstimate, Grid};
pub use error::{Error, Result};
pub use estimation::{fit_rate, RateEstimate};
pub use noise::{BridgeDecomposition, CouplingKind, PathLattice};
pub use poly::Polynomial;
pub use rng::{Purpose, SeedTree, Stream};
pub use solvers::{Scheme, SolutionPath};
pub use transforms::{TransformG, TransformH};
