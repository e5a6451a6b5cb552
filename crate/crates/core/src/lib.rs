//! Simulation and analysis of phase-reference-free probabilistic cloning of
//! coherent states.
//!
//! The cloner displaces the input by a fixed amplitude with a uniformly random
//! phase, taps part of the light onto a photon-number-resolving detector,
//! accepts the run when at least `M` photons are counted, and splits the
//! remaining light symmetrically into clones.
//!
//! - [`states`]: coherent mixtures, truncated Fock space, Wigner functions
//! - [`channel`]: the cloner itself, exact and Fock-oracle backends
//! - [`metrics`]: fidelity, gain, success rate, clone covariances
//! - [`montecarlo`]: pulse-by-pulse emulation with stored photon counts
//! - [`tomography`]: maximum-likelihood reconstruction from homodyne samples
//! - [`optimizer`]: displacement optimization and parameter sweeps

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod format;
pub mod metrics;
pub mod montecarlo;
pub mod optimizer;
pub mod special;
pub mod states;
pub mod tomography;

pub use error::{ClonerError, Result};
pub use states::ComplexAmplitude;
