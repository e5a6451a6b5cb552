//! Figures of merit for a cloner output.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_cloner, ClonerConfig, HeraldedOutput};
use crate::error::{invalid, ClonerError, Result};
use crate::states::{CMatrix, ComplexAmplitude, DensityMatrix};

/// Universal deterministic Gaussian cloning bound.
pub const GAUSSIAN_DETERMINISTIC_FIDELITY: f64 = 2.0 / 3.0;
/// Best known deterministic phase-covariant cloner (optimal phase measurement).
pub const PHASE_DETERMINISTIC_FIDELITY: f64 = 0.85;
/// Clone-clone covariance left by deterministic Gaussian cloning (one vacuum unit).
pub const GAUSSIAN_DETERMINISTIC_COVARIANCE: f64 = 0.5;

/// In-phase and out-of-phase quadrature covariances between clones 1 and 2,
/// in the frame whose X axis points along the input amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub cov_x1x2: f64,
    pub cov_p1p2: f64,
    pub cov_x1p2: f64,
    pub cov_p1x2: f64,
}

impl CovarianceReport {
    pub fn max_abs_difference(&self, other: &CovarianceReport) -> f64 {
        [
            self.cov_x1x2 - other.cov_x1x2,
            self.cov_p1p2 - other.cov_p1p2,
            self.cov_x1p2 - other.cov_x1p2,
            self.cov_p1x2 - other.cov_p1x2,
        ]
        .iter()
        .map(|d| d.abs())
        .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        [self.cov_x1x2, self.cov_p1p2, self.cov_x1p2, self.cov_p1x2]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// `(1/c) sum_i <alpha| rho_i |alpha>` over all clones.
pub fn average_clone_fidelity(out: &HeraldedOutput, alpha: ComplexAmplitude) -> Result<f64> {
    alpha.validate("target amplitude")?;
    let clones = out.clones();
    let total: f64 = clones.iter().map(|c| c.fidelity_with_coherent(alpha)).sum();
    Ok((total / clones.len() as f64).clamp(0.0, 1.0))
}

/// Where the amplitude gain is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainReference {
    /// The displaced, heralded mode before the tap: a property of the amplifier.
    #[default]
    AmplifiedMode,
    /// After tap transmission `sqrt(1-R)`.
    AfterTap,
}

/// `|mean heralded amplitude| / |alpha|` on the amplified mode.
pub fn amplitude_gain(out: &HeraldedOutput, alpha: ComplexAmplitude) -> Result<f64> {
    amplitude_gain_at(out, alpha, GainReference::AmplifiedMode)
}

pub fn amplitude_gain_at(out: &HeraldedOutput, alpha: ComplexAmplitude, reference: GainReference) -> Result<f64> {
    alpha.validate("alpha")?;
    let a = alpha.norm();
    if a == 0.0 {
        return Err(invalid("amplitude gain is undefined for alpha = 0"));
    }
    let mode = match reference {
        GainReference::AmplifiedMode => &out.displaced,
        GainReference::AfterTap => &out.post_herald,
    };
    Ok(mode.mean_amplitude().norm() / a)
}

fn frame_phase(alpha: ComplexAmplitude) -> f64 {
    if alpha.norm_sqr() > 0.0 {
        alpha.arg()
    } else {
        0.0
    }
}

/// Clone-clone covariances of a mixture of product coherent states. Vacuum
/// noise is uncorrelated across modes, so only the spread of the per-member
/// mean quadratures contributes.
pub fn covariance_matrix(out: &HeraldedOutput) -> Result<CovarianceReport> {
    if out.config.n_clones != 2 {
        return Err(invalid(format!("covariance report needs two clones, got {}", out.config.n_clones)));
    }
    let clone = out.clone_ensemble().rotated(-frame_phase(out.config.alpha));
    let stats = clone.quadrature_stats();
    let (mut xx, mut pp, mut xp) = (0.0, 0.0, 0.0);
    for m in clone.members() {
        let dx = std::f64::consts::SQRT_2 * m.amplitude.re - stats.mean_x;
        let dp = std::f64::consts::SQRT_2 * m.amplitude.im - stats.mean_p;
        xx += m.weight * dx * dx;
        pp += m.weight * dp * dp;
        xp += m.weight * dx * dp;
    }
    // both clones carry the same member amplitude, so X1P2 and P1X2 coincide
    Ok(CovarianceReport {
        cov_x1x2: xx,
        cov_p1p2: pp,
        cov_x1p2: xp,
        cov_p1x2: xp,
    })
}

fn rotated_quadratures(dim: usize, theta: f64) -> (CMatrix, CMatrix) {
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let quad = |phi: f64| {
        let e = Complex64::from_polar(1.0, -phi);
        (&a * e + a.adjoint() * e.conj()) / Complex64::new(std::f64::consts::SQRT_2, 0.0)
    };
    (quad(theta), quad(theta + std::f64::consts::FRAC_PI_2))
}

/// Covariances from a two-mode density matrix (index `i * dim + l`), measured
/// in the frame rotated by `arg(alpha)`.
pub fn covariance_from_joint(joint: &DensityMatrix, dim: usize, alpha: ComplexAmplitude) -> Result<CovarianceReport> {
    if joint.dim() != dim * dim {
        return Err(ClonerError::DimensionMismatch(joint.dim(), dim * dim));
    }
    let (x, p) = rotated_quadratures(dim, frame_phase(alpha));
    let id = CMatrix::identity(dim, dim);
    let rho = joint.matrix();
    let expect = |op: &CMatrix| (rho * op).trace().re;
    let x1 = expect(&x.kronecker(&id));
    let p1 = expect(&p.kronecker(&id));
    let x2 = expect(&id.kronecker(&x));
    let p2 = expect(&id.kronecker(&p));
    Ok(CovarianceReport {
        cov_x1x2: expect(&x.kronecker(&x)) - x1 * x2,
        cov_p1p2: expect(&p.kronecker(&p)) - p1 * p2,
        cov_x1p2: expect(&x.kronecker(&p)) - x1 * p2,
        cov_p1x2: expect(&p.kronecker(&x)) - p1 * x2,
    })
}

/// Input amplitude reconstructed from the powers seen by both homodyne
/// detectors (unit efficiency) and the heralding detector (efficiency `eta_pnrd`).
pub fn infer_input_amplitude(p_hd1: f64, p_hd2: f64, p_pnrd: f64, eta_pnrd: f64) -> Result<f64> {
    if !(eta_pnrd > 0.0 && eta_pnrd <= 1.0) {
        return Err(invalid(format!("eta_pnrd must lie in (0,1], got {eta_pnrd}")));
    }
    for (name, v) in [("p_hd1", p_hd1), ("p_hd2", p_hd2), ("p_pnrd", p_pnrd)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(invalid(format!("{name} must be a finite mean photon number >= 0, got {v}")));
        }
    }
    Ok((p_hd1 + p_hd2 + p_pnrd / eta_pnrd).sqrt())
}

pub fn success_probability(out: &HeraldedOutput) -> Result<f64> {
    out.success_probability
        .ok_or(ClonerError::NotApplicable("success probability of an exact-subtraction output"))
}

/// Every analytic figure of merit for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloneMetrics {
    pub fidelity: f64,
    /// `None` when `alpha = 0`.
    pub gain: Option<f64>,
    pub success_probability: f64,
    /// `None` unless there are exactly two clones.
    pub covariance: Option<CovarianceReport>,
    pub beats_phase_benchmark: bool,
}

pub fn evaluate(cfg: &ClonerConfig) -> Result<CloneMetrics> {
    let out = apply_cloner(cfg)?;
    let fidelity = average_clone_fidelity(&out, cfg.alpha)?;
    Ok(CloneMetrics {
        fidelity,
        gain: amplitude_gain(&out, cfg.alpha).ok(),
        success_probability: success_probability(&out)?,
        covariance: covariance_matrix(&out).ok(),
        beats_phase_benchmark: fidelity > PHASE_DETERMINISTIC_FIDELITY,
    })
}
