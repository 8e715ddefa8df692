//! Decoherence factors, environment-state fidelities, and objectivity
//! bounds for a central spin coupled to independent spin-`j` environments.
//!
//! The crate provides three layers:
//!
//! * dense matrix machinery for single spins ([`spin`], [`matfun`],
//!   [`state`], [`quadrature`]) — operators, propagators, coherent and
//!   thermal states, Uhlmann fidelity;
//! * closed-form kernels for one environment spin ([`measurement`] for the
//!   static, measurement-like coupling; [`thermal`] for the full dynamics
//!   at inverse temperature `β`), each paired with a brute-force oracle
//!   built from the dense layer;
//! * aggregates over many spins ([`sbs`] for the objectivity bound and
//!   short-time Gaussian envelopes, [`ensemble`] for seeded runs averaged
//!   over random coupling draws).
//!
//! Everything is generic over the scalar type via [`Real`] (shipped
//! implementations: `f64`, `f32`); the `*F64` aliases at the crate root name
//! the default precision. Units: energies in `Ω`, times in `1/Ω`, with the
//! coupling entering as `g/Ω`.
//!
//! Conventions: the `S_z` basis is ordered `m = +j, j-1, …, -j`; the
//! lowest-weight vector `|j; -j⟩` is the last basis vector.

pub mod ensemble;
pub mod error;
pub mod matfun;
pub mod measurement;
pub mod quadrature;
pub mod real;
pub mod sbs;
pub mod spin;
pub mod state;
pub mod thermal;

pub use error::{Error, Result};
pub use real::Real;
pub use spin::Spin;

/// Spin operator at the default `f64` precision.
pub type SpinOperatorF64 = spin::SpinOperator<f64>;
/// Single-spin density matrix at the default `f64` precision.
pub type SpinStateF64 = state::SpinState<f64>;
/// Central-system matrix at the default `f64` precision.
pub type SystemStateF64 = state::SystemState<f64>;
/// Measurement-limit parameter set at the default `f64` precision.
pub type CoherentGammaParamsF64 = measurement::CoherentGammaParams<f64>;
/// Axial expansion coefficients at the default `f64` precision.
pub type AxialPCoefficientsF64 = measurement::AxialPCoefficients<f64>;
/// Thermal single-spin parameter set at the default `f64` precision.
pub type ThermalParamsF64 = thermal::ThermalParams<f64>;
/// Thermal overlap kernel at the default `f64` precision.
pub type GammaKernelF64 = thermal::GammaKernel<f64>;
/// Environment partition at the default `f64` precision.
pub type MacrofractionLayoutF64 = sbs::MacrofractionLayout<f64>;
/// Objectivity-bound breakdown at the default `f64` precision.
pub type SbsBoundReportF64 = sbs::SbsBoundReport<f64>;
/// Coupling distribution at the default `f64` precision.
pub type CouplingDistributionF64 = ensemble::CouplingDistribution<f64>;
/// Ensemble experiment configuration at the default `f64` precision.
pub type ExperimentConfigF64 = ensemble::ExperimentConfig<f64>;
/// Ensemble experiment output at the default `f64` precision.
pub type EnsembleRunF64 = ensemble::EnsembleRun<f64>;
