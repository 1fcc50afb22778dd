//! Numerical laboratory for spontaneous inter-band transitions under
//! adiabatic switching.
//!
//! A one-dimensional two-band lattice Dirac Hamiltonian `H0` is perturbed by
//! an attractive square well `V`. As the coupling `lambda` grows, a bound
//! state leaves the upper band, crosses the gap and merges with the lower
//! band at the critical coupling `lambda_c`. Switching `lambda * V` on and
//! off with the smooth envelope `phi_eps(t)` produces a finite-time
//! scattering matrix `S` whose lower/upper block norm `||P- S P+||` vanishes
//! in the adiabatic limit below `lambda_c` and approaches one above it.
//!
//! Module map:
//!
//! - [`model`]: lattice parameters, `H0`, `V`, band windows.
//! - [`system`]: a model together with the `H0` eigenbasis every other
//!   module works in.
//! - [`spectral`]: eigendecompositions, spectral projectors, dive curves and
//!   the critical coupling.
//! - [`switching`]: the plateau bump and the two-sided switching factor.
//! - [`propagation`]: the time-ordered propagator of the switched drive.
//! - [`scattering`]: adiabatic and static Moller operators and S-matrices.
//! - [`witness`]: the explicit over-critical test vector and its overlaps.
//! - [`experiments`]: sweeps, reports, file outputs and the CLI.
//!
//! The numerical core is generic over the real scalar type ([`Real`]); the
//! aliases below fix it to `f64`, which is what the driver and the CLI use.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod model;
pub mod propagation;
pub mod scalar;
pub mod scattering;
pub mod spectral;
pub mod switching;
pub mod system;
pub mod witness;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Complex64 = nalgebra::Complex<f64>;

pub type Model = model::TwoBandModel<f64>;
pub type Operator = model::HermitianOperator<f64>;
pub type Bands = model::BandWindows<f64>;
pub type Lattice = system::System<f64>;
pub type Decomposition = spectral::SpectralDecomposition<f64>;
pub type Bump = switching::BumpProfile<f64>;
pub type Schedule = switching::SwitchingSchedule<f64>;
pub type Evolution = propagation::EvolutionConfig<f64>;
pub type State = propagation::StateVector<f64>;
pub type Scattering = scattering::SMatrix<f64>;
pub type Witness = witness::WitnessBundle<f64>;

pub type ModelF32 = model::TwoBandModel<f32>;
pub type LatticeF32 = system::System<f32>;
pub type BumpF32 = switching::BumpProfile<f32>;
