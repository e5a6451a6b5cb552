use std::f64::consts::TAU;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ClonerConfig;
use super::herald::herald_weight;
use crate::error::{invalid, ClonerError, Result};
use crate::states::{CoherentEnsemble, ComplexAmplitude, EnsembleMember};

/// The displaced input `alpha + x|alpha| e^{i phi_j}` on `k` equally spaced
/// phases `phi_j = 2 pi j / k`, equally weighted.
///
/// The global phase of `D(beta)|alpha>` is dropped; it cancels in the mixture.
pub fn ring_ensemble(alpha: ComplexAmplitude, x: f64, k: usize) -> Result<CoherentEnsemble> {
    alpha.validate("alpha")?;
    if k == 0 {
        return Err(invalid("ring needs at least one point"));
    }
    let radius = x * alpha.norm();
    CoherentEnsemble::uniform((0..k).map(|j| alpha + ComplexAmplitude::from_polar(radius, TAU * j as f64 / k as f64)))
}

/// Which conditioning produced a [`HeraldedOutput`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeraldMode {
    /// At least `threshold` counts on the tap detector.
    Threshold,
    /// Ideal removal of `photons` photons from the displaced mode.
    ExactSubtraction { photons: u32 },
}

/// Result of running the cloner on one configuration.
///
/// `displaced` is the conditional mixture of the displaced amplitudes
/// `gamma_j` before the tap. `post_herald` is the same mixture after tap
/// transmission (`sqrt(1-R) gamma_j`). Each clone is `displaced` scaled by
/// `clone_scale = sqrt((1-R)/c)`; all clones share the mixing variable, which
/// is where their classical correlations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeraldedOutput {
    pub config: ClonerConfig,
    pub mode: HeraldMode,
    pub displaced: CoherentEnsemble,
    pub post_herald: CoherentEnsemble,
    pub clone_scale: f64,
    /// `None` for exact subtraction, whose acceptance probability is an improper limit.
    pub success_probability: Option<f64>,
}

impl HeraldedOutput {
    fn from_weights(
        cfg: &ClonerConfig,
        mode: HeraldMode,
        ring: &CoherentEnsemble,
        weights: Vec<f64>,
        success: Option<f64>,
    ) -> Result<Self> {
        let members = ring
            .members()
            .iter()
            .zip(weights)
            .map(|(m, weight)| EnsembleMember {
                amplitude: m.amplitude,
                weight,
            })
            .collect();
        let displaced = CoherentEnsemble::new(members)?;
        let post_herald = displaced.scaled((1.0 - cfg.tap_reflectivity).sqrt());
        Ok(Self {
            config: *cfg,
            mode,
            displaced,
            post_herald,
            clone_scale: cfg.clone_scale(),
            success_probability: success,
        })
    }

    /// State of any single clone.
    pub fn clone_ensemble(&self) -> CoherentEnsemble {
        self.displaced.scaled(self.clone_scale)
    }

    /// All `c` clone marginals (identical under symmetric splitting).
    pub fn clones(&self) -> Vec<CoherentEnsemble> {
        vec![self.clone_ensemble(); self.config.n_clones]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn herald_weights(ring: &CoherentEnsemble, cfg: &ClonerConfig) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    let it = ring.members().par_iter();
    #[cfg(not(feature = "parallel"))]
    let it = ring.members().iter();
    it.map(|m| herald_weight(m.amplitude, cfg)).collect()
}

/// Displace on the ring, herald on `>= threshold` tap counts, split.
pub fn apply_cloner(cfg: &ClonerConfig) -> Result<HeraldedOutput> {
    cfg.validate()?;
    let ring = ring_ensemble(cfg.alpha, cfg.x, cfg.ring_points)?;
    let weights = herald_weights(&ring, cfg);
    // fixed summation order, independent of how the weights were computed
    let success = weights.iter().sum::<f64>() / weights.len() as f64;
    if !(success > 0.0) {
        return Err(ClonerError::Unheraldable);
    }
    HeraldedOutput::from_weights(cfg, HeraldMode::Threshold, &ring, weights, Some(success.min(1.0)))
}

/// Idealized `m`-photon subtraction: coherent members are eigenstates of the
/// annihilation operator, so `a^m` reweights member `j` by `|gamma_j|^{2m}`.
/// This is the vanishing-tap limit of [`apply_cloner`].
pub fn exact_subtraction_cloner(cfg: &ClonerConfig, m: u32) -> Result<HeraldedOutput> {
    cfg.validate()?;
    if m == 0 {
        return Err(invalid("exact subtraction needs at least one photon"));
    }
    let ring = ring_ensemble(cfg.alpha, cfg.x, cfg.ring_points)?;
    let largest = ring.max_photon_number();
    if largest == 0.0 {
        return Err(ClonerError::Unheraldable);
    }
    let weights = ring
        .members()
        .iter()
        .map(|mem| (mem.amplitude.norm_sqr() / largest).powi(m as i32))
        .collect();
    HeraldedOutput::from_weights(cfg, HeraldMode::ExactSubtraction { photons: m }, &ring, weights, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::DetectorModel;

    #[test]
    fn ring_examples() {
        let a = ComplexAmplitude::real(1.0);
        let r = ring_ensemble(a, 0.0, 16).unwrap();
        assert_eq!(r.len(), 16);
        assert!(r.members().iter().all(|m| m.amplitude == a));

        let r = ring_ensemble(a, 0.5, 4).unwrap();
        let expect = [(1.5, 0.0), (1.0, 0.5), (0.5, 0.0), (1.0, -0.5)];
        for (m, (re, im)) in r.members().iter().zip(expect) {
            assert!((m.amplitude.re - re).abs() < 1e-15 && (m.amplitude.im - im).abs() < 1e-15);
            assert_eq!(m.weight, 0.25);
        }
        for k in [3, 8, 17, 64] {
            let c = ComplexAmplitude::new(0.3, -1.2);
            let mean = ring_ensemble(c, 0.7, k).unwrap().mean_amplitude();
            assert!((mean.re - c.re).abs() < 1e-14 && (mean.im - c.im).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn plain_splitting() {
        let cfg = ClonerConfig::new(ComplexAmplitude::real(1.3), 0.0, 0);
        let out = apply_cloner(&cfg).unwrap();
        assert_eq!(out.success_probability, Some(1.0));
        let clone = out.clone_ensemble();
        let target = 1.3 / 2f64.sqrt();
        assert!(clone.members().iter().all(|m| (m.amplitude.re - target).abs() < 1e-15));
    }

    #[test]
    fn weak_state_gain_two() {
        // analytic weighted ring average (a^2 + 2 b^2) / (a^2 + b^2), a = 0.1, b = 1
        let expect = (0.01 + 2.0) / 1.01;
        let cfg = ClonerConfig::new(ComplexAmplitude::real(0.1), 10.0, 1);
        let out = exact_subtraction_cloner(&cfg, 1).unwrap();
        assert_eq!(out.success_probability, None);
        let gain = out.displaced.mean_amplitude().norm() / 0.1;
        assert!((gain - expect).abs() < 1e-12, "{gain}");

        let tapped = apply_cloner(&cfg.with_tap(1e-4)).unwrap();
        let g2 = tapped.displaced.mean_amplitude().norm() / 0.1;
        assert!(((g2 - gain) / gain).abs() < 1e-4, "{g2} vs {gain}");
    }

    #[test]
    fn exact_subtraction_without_displacement_is_identity_weighting() {
        let cfg = ClonerConfig::new(ComplexAmplitude::real(0.8), 0.0, 1);
        let out = exact_subtraction_cloner(&cfg, 1).unwrap();
        let w0 = out.displaced.members()[0].weight;
        assert!(out.displaced.members().iter().all(|m| (m.weight - w0).abs() < 1e-15));
        assert!(exact_subtraction_cloner(&ClonerConfig::new(ComplexAmplitude::ZERO, 1.0, 1), 1).is_err());
        assert!(exact_subtraction_cloner(&cfg, 0).is_err());
    }

    #[test]
    fn success_decreases_with_threshold() {
        let base = ClonerConfig::experimental(1.0, 0.5, 1);
        let s1 = apply_cloner(&base).unwrap().success_probability.unwrap();
        let s5 = apply_cloner(&base.with_threshold(5)).unwrap().success_probability.unwrap();
        assert!(s5 < s1);
    }

    #[test]
    fn vacuum_input_cannot_herald() {
        let cfg = ClonerConfig::experimental(0.0, 0.5, 1);
        assert!(matches!(apply_cloner(&cfg), Err(ClonerError::Unheraldable)));
        let dark = cfg.with_detector(DetectorModel {
            efficiency: 0.63,
            dark_mean: 0.05,
        });
        let out = apply_cloner(&dark).unwrap();
        assert!((out.success_probability.unwrap() - (1.0 - (-0.05f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn output_json_inlines_ensembles() {
        let out = apply_cloner(&ClonerConfig::experimental(1.0, 0.5, 2)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out.to_json().unwrap()).unwrap();
        assert_eq!(v["post_herald"]["members"].as_array().unwrap().len(), 64);
        assert_eq!(v["config"]["threshold"], 2);
        assert_eq!(v["mode"]["kind"], "threshold");
    }
}
