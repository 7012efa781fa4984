//! Spatially homogeneous, radially symmetric quantum Boltzmann equation
//! `df/dt = C12[f] + C22[f]` for a Bose gas coupled to a condensate, with the
//! Bogoliubov dispersion law.

pub mod artifacts;
pub mod collision;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod manifolds;
pub mod oracle;
pub mod physics;
pub mod quadrature;
pub mod sampling;
pub mod scenario;

pub use collision::{CollisionOperator, CollisionRates, Which};
pub use error::{QbeError, Result};
pub use grid::{DistributionState, FeasibleSetSpec, GridSpec, RadialGrid, SchemeKind};
pub use physics::{ParamInputs, PhysicalParams};
