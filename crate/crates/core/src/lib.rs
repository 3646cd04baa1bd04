//! Stochastic-Galerkin particle solver for the 1D-1V Vlasov–Poisson–BGK
//! system with one uniformly distributed random input.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::needless_range_loop, clippy::neg_multiply))]

pub mod collision;
pub mod error;
pub mod fields;
pub mod gpc;
pub mod observables;
pub mod particles;
pub mod rng;
pub mod scenarios;
pub mod transport;

pub use collision::{BgkSampling, MaxwellianPool, NodeCellMoments, PoolMode};
pub use error::{Error, Result};
pub use fields::{Boundary, NodeFieldSet, SpatialGrid};
pub use gpc::{ChaosVector, GpcBasis};
pub use observables::{EnergyTimeSeries, FitMode, PhaseSpaceDensity};
pub use particles::{Affine, ChaosEnsemble, InitialCondition, Loading};
pub use scenarios::{run, run_convergence, Preset, Profile, ScenarioConfig, Simulation};
pub use transport::{BoundaryRules, PeriodicRule, Propagator, ReflectRule, Splitting, StepParams};
