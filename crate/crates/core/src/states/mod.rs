//! Single-mode bosonic states in two interchangeable representations: exact
//! mixtures of coherent states and truncated Fock-space density matrices.
//!
//! Quadratures follow `X = (a + a†)/√2`, `P = (a - a†)/(i√2)`, so the vacuum
//! variance is 1/2 and a coherent state `|mu>` has `<X> = √2 Re mu`,
//! `<P> = √2 Im mu`.

mod amplitude;
mod ensemble;
mod fock;
mod wigner;

pub use amplitude::ComplexAmplitude;
pub use ensemble::{CoherentEnsemble, EnsembleMember, QuadratureStats};
pub use fock::{coherent_fock, default_dim, displacement_matrix, ensemble_to_density, loss_channel, CMatrix, CVector, DensityMatrix};
pub use wigner::{wigner, wigner_fock, FockWigner, GridSpec, WignerGrid, WignerSource};

pub(crate) const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Vacuum variance of either quadrature.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// States that can be scored against a coherent target.
pub trait CoherentOverlap {
    fn fidelity_with_coherent(&self, alpha: ComplexAmplitude) -> crate::Result<f64>;
}

impl CoherentOverlap for CoherentEnsemble {
    fn fidelity_with_coherent(&self, alpha: ComplexAmplitude) -> crate::Result<f64> {
        alpha.validate("target amplitude")?;
        Ok(CoherentEnsemble::fidelity_with_coherent(self, alpha))
    }
}

impl CoherentOverlap for DensityMatrix {
    fn fidelity_with_coherent(&self, alpha: ComplexAmplitude) -> crate::Result<f64> {
        DensityMatrix::fidelity_with_coherent(self, alpha)
    }
}

/// `<alpha| rho |alpha>` for either representation.
pub fn fidelity_with_coherent<S: CoherentOverlap + ?Sized>(state: &S, alpha: ComplexAmplitude) -> crate::Result<f64> {
    state.fidelity_with_coherent(alpha)
}
