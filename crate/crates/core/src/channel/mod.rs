//! The cloning protocol: phase-randomized displacement, photon-number
//! threshold heralding on a tapped fraction, symmetric splitting.
//!
//! Heralding uses "count >= threshold", so threshold 0 accepts every run.

mod cloner;
mod config;
mod herald;
mod oracle;

pub use cloner::{apply_cloner, exact_subtraction_cloner, ring_ensemble, HeraldMode, HeraldedOutput};
pub use config::{ClonerConfig, DetectorModel, DEFAULT_RING_POINTS, MIN_RING_POINTS};
pub use herald::{herald_weight, poisson_tail};
pub use oracle::{fock_oracle_cloner, FockOracleOutput, JOINT_DIM_LIMIT, ORACLE_DEFICIT_LIMIT};
