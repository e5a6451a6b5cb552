use serde::{Deserialize, Serialize};

use super::amplitude::ComplexAmplitude;
use super::SQRT_2;
use crate::error::{invalid, ClonerError, Result};

/// One coherent component of a mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub amplitude: ComplexAmplitude,
    pub weight: f64,
}

/// A normalized, weighted mixture of coherent states `sum_i w_i |g_i><g_i|`.
///
/// This is the exact representation of every state produced by the cloner:
/// a phase-randomized displacement of a coherent state is a mixture of
/// coherent states, and heralding on photon counts only reweights it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherentEnsemble {
    members: Vec<EnsembleMember>,
}

#[derive(Deserialize)]
struct RawEnsemble {
    members: Vec<EnsembleMember>,
}

impl<'de> Deserialize<'de> for CoherentEnsemble {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawEnsemble::deserialize(d)?;
        CoherentEnsemble::new(raw.members).map_err(serde::de::Error::custom)
    }
}

/// First and second quadrature moments of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureStats {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
}

impl CoherentEnsemble {
    /// Builds an ensemble and normalizes its weights to unit sum.
    pub fn new(members: Vec<EnsembleMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(invalid("ensemble must have at least one member"));
        }
        let mut total = 0.0;
        for m in &members {
            m.amplitude.validate("ensemble amplitude")?;
            if !(m.weight >= 0.0) || !m.weight.is_finite() {
                return Err(invalid(format!("ensemble weight must be finite and >= 0, got {}", m.weight)));
            }
            total += m.weight;
        }
        if total <= 0.0 {
            return Err(ClonerError::Unheraldable);
        }
        let members = members
            .into_iter()
            .map(|m| EnsembleMember {
                amplitude: m.amplitude,
                weight: m.weight / total,
            })
            .collect();
        Ok(Self { members })
    }

    /// Equal-weight mixture of the given amplitudes.
    pub fn uniform(amplitudes: impl IntoIterator<Item = ComplexAmplitude>) -> Result<Self> {
        Self::new(
            amplitudes
                .into_iter()
                .map(|amplitude| EnsembleMember { amplitude, weight: 1.0 })
                .collect(),
        )
    }

    pub fn pure(alpha: ComplexAmplitude) -> Self {
        Self {
            members: vec![EnsembleMember {
                amplitude: alpha,
                weight: 1.0,
            }],
        }
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Scales every amplitude by a real factor (beamsplitter transmission).
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            members: self
                .members
                .iter()
                .map(|m| EnsembleMember {
                    amplitude: m.amplitude.scale(s),
                    weight: m.weight,
                })
                .collect(),
        }
    }

    /// Rotates every amplitude by `e^{i theta}`.
    pub fn rotated(&self, theta: f64) -> Self {
        Self {
            members: self
                .members
                .iter()
                .map(|m| EnsembleMember {
                    amplitude: m.amplitude.rotate(theta),
                    weight: m.weight,
                })
                .collect(),
        }
    }

    /// Weighted mean amplitude `sum_i w_i g_i`.
    pub fn mean_amplitude(&self) -> ComplexAmplitude {
        let (re, im) = self.members.iter().fold((0.0, 0.0), |(re, im), m| {
            (re + m.weight * m.amplitude.re, im + m.weight * m.amplitude.im)
        });
        ComplexAmplitude::new(re, im)
    }

    /// Largest member photon number, used for truncation rules.
    pub fn max_photon_number(&self) -> f64 {
        self.members.iter().map(|m| m.amplitude.norm_sqr()).fold(0.0, f64::max)
    }

    /// Shannon entropy of the mixing weights (nats).
    pub fn weight_entropy(&self) -> f64 {
        -self
            .members
            .iter()
            .filter(|m| m.weight > 0.0)
            .map(|m| m.weight * m.weight.ln())
            .sum::<f64>()
    }

    /// Quadrature means and variances. Each member contributes vacuum noise 1/2
    /// plus the spread of its mean quadrature across the mixture.
    pub fn quadrature_stats(&self) -> QuadratureStats {
        let mean = self.mean_amplitude();
        let (mean_x, mean_p) = (SQRT_2 * mean.re, SQRT_2 * mean.im);
        let (mut spread_x, mut spread_p) = (0.0, 0.0);
        for m in &self.members {
            let dx = SQRT_2 * m.amplitude.re - mean_x;
            let dp = SQRT_2 * m.amplitude.im - mean_p;
            spread_x += m.weight * dx * dx;
            spread_p += m.weight * dp * dp;
        }
        QuadratureStats {
            mean_x,
            mean_p,
            var_x: 0.5 + spread_x,
            var_p: 0.5 + spread_p,
        }
    }

    /// `<alpha| rho |alpha> = sum_i w_i exp(-|alpha - g_i|^2)`.
    pub fn fidelity_with_coherent(&self, alpha: ComplexAmplitude) -> f64 {
        let f: f64 = self
            .members
            .iter()
            .map(|m| {
                let d = alpha.to_complex() - m.amplitude.to_complex();
                m.weight * (-d.norm_sqr()).exp()
            })
            .sum();
        f.clamp(0.0, 1.0)
    }
}
