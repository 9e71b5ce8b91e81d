//! Simulation and diagnosis toolkit for nanoscale autonomous absorption
//! chillers.
//!
//! The crate builds small open quantum systems (three-level, four-level and
//! three-qubit chillers with their variants), assembles their LGKS
//! generators with detailed-balance Ohmic rates and optional spectral
//! filtering, solves the non-equilibrium steady state, decomposes the
//! four-level heat currents into two endoreversible stages plus a heat leak,
//! samples stochastic jump trajectories, and sweeps/optimizes cooling
//! performance.
//!
//! All core math is generic over the floating-point type through
//! [`scalar::Scalar`]; the `*64` aliases below pin the `f64` instantiations
//! used by the command-line tools. Units: `hbar = k_B = 1`.

// negated comparisons like `!(x > 0)` are used on purpose: they reject NaN
// along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub use nalgebra;

pub mod error;
pub mod lindblad;
pub mod mcwf;
pub mod models;
pub mod scalar;
pub mod stages;
pub mod sweep;
pub mod thermo;

pub use error::{ChillerError, Result};
pub use scalar::{lit, Scalar};

/// `f64` instantiations of the core types.
pub type SystemModel64 = models::SystemModel<f64>;
pub type BathSpec64 = models::BathSpec<f64>;
pub type SpectralFilter64 = models::SpectralFilter<f64>;
pub type Eigensystem64 = models::Eigensystem<f64>;
pub type BohrChannel64 = lindblad::BohrChannel<f64>;
pub type Liouvillian64 = lindblad::Liouvillian<f64>;
pub type SteadyReport64 = thermo::SteadyReport<f64>;
pub type StageBreakdown64 = stages::StageBreakdown<f64>;
pub type DiagnosisReport64 = stages::DiagnosisReport<f64>;
pub type CurrentEstimate64 = mcwf::CurrentEstimate<f64>;
pub type SweepConfig64 = sweep::SweepConfig<f64>;
pub type OptimumReport64 = sweep::OptimumReport<f64>;
