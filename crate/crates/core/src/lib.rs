//! Simulation and numerical verification toolkit for lattice spin systems
//! driven by white symmetric α-stable noise.
//!
//! - [`stable`]: stable densities, the OU kernel and semigroup, the fractional generator, a sampler.
//! - [`lattice`]: cubes, states, interaction models and cylinder observables.
//! - [`sim`]: Euler–Maruyama ensembles on counter-based noise.
//! - [`lab`]: Monte-Carlo semigroup estimators and the bound checkers.

pub mod lab;
pub mod lattice;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod stable;

pub use lab::{
    estimate_gradient, estimate_second_gradient, estimate_semigroup, LabError, SemigroupEstimate, DEFAULT_H,
};
pub use lattice::{
    choose_b, validate_assumptions, AssumptionReport, BallParams, Cube, CylinderObservable, InteractionModel,
    LatticeError, LatticeIndex, LatticeState, PotentialFamily,
};
pub use sim::{run_ensemble, EnsembleStats, NoiseMode, SimConfig, SimError, Trajectory};
pub use stable::{KernelError, KernelGrid, StableParams};
