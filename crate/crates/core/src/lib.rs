//! Coherent transport of atomic population (CTAP) in a three-well
//! Bose-Hubbard model, simulated with mean-field, truncated Wigner and
//! positive-P phase-space methods.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: parameters and the counter-intuitive pulse schedule;
//! - [`sampling`]: initial-state samplers for each representation;
//! - [`dynamics`]: single-trajectory integrators;
//! - [`observables`]: ensemble moments, populations and ξ₁₃;
//! - [`runner`]: configuration, parallel orchestration and output files.

pub mod dynamics;
pub mod error;
pub mod model;
pub mod observables;
pub mod rng;
pub mod runner;
pub mod sampling;

pub use dynamics::{Amplitudes, IntegrationConfig, Integrator, PpAmps, Scheme, TrajectoryState};
pub use error::{Error, Result};
pub use model::{Couplings, ModelParams, PulseSchedule, Representation};
pub use observables::{Estimate, MomentAccumulator, SampleGrid, StateKind, TimeSeries};
pub use rng::TrajectoryRng;
pub use runner::{RunConfig, RunReport};
pub use sampling::{InitialStateSpec, WellState};
