//! Solver library for an incompressible multicomponent cross-diffusion
//! system on the periodic torus.
//!
//! The species velocities are split into a common solenoidal convection
//! part and a diffusive part living in the orthogonal complement of the
//! ones vector, where the mixture matrix is invertible. The library
//! provides the matrix algebra, Fourier pseudospectral operators, the
//! orthogonal velocity reconstruction, explicit and semi-implicit time
//! steppers, and diagnostics that track the conservation and decay
//! structure of the system.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod integrate;
pub mod mixture;
pub mod orthogonal;
pub mod scalar;
pub mod spectral;

pub use error::{CoreError, Result};
pub use scalar::Real;

/// Concrete `f64` aliases for the main types.
pub type DiffusionTable64 = mixture::DiffusionTable<f64>;
pub type MsMatrix64 = mixture::MsMatrix<f64>;
pub type GapConstants64 = mixture::GapConstants<f64>;
pub type ScalarField64 = grid::ScalarField<f64>;
pub type VectorField64 = grid::VectorField<f64>;
pub type SpeciesField64 = grid::SpeciesField<f64>;
pub type SpeciesVelocityField64 = grid::SpeciesVelocityField<f64>;
pub type SpectralWorkspace64 = spectral::SpectralWorkspace<f64>;
pub type OrthogonalState64 = orthogonal::OrthogonalState<f64>;
pub type SimulationState64 = integrate::SimulationState<f64>;
pub type StepperConfig64 = integrate::StepperConfig<f64>;
pub type RunRecord64 = diagnostics::RunRecord<f64>;
pub type RegimeCertificate64 = diagnostics::RegimeCertificate<f64>;
