//! Single-photon routing in a waveguide by a Λ-type emitter whose levels are
//! Zeeman-shifted by a superconducting flux qubit.
//!
//! The photon is emitted by a source cavity with a time-dependent decay rate
//! and cascaded into the emitter. The crate provides the closed-form
//! steady-state scattering response ([`analytic`]), a cascaded Lindblad
//! solver ([`propagate`]), and the post-processing that turns the solution
//! into routing, entanglement and heralding figures of merit ([`metrics`], [`herald`]).
//!
//! All rates are in units of the waveguide decay rate Γ_wg and all times in
//! units of 1/Γ_wg; [`units`] converts from physical units.

pub mod analytic;
pub mod error;
pub mod herald;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod propagate;
pub mod units;

pub use error::{Error, Result};
pub use model::{FluxQubitConfig, FluxState, PulseSpec, SystemParams};
pub use propagate::{evolve, EvolveOptions, TimeSeries};
