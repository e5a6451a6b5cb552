use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::states::ComplexAmplitude;

/// Photon-number-resolving detector after the tap: binomial loss with
/// efficiency `efficiency`, plus Poissonian dark counts with mean `dark_mean`
/// per gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    #[serde(default)]
    pub dark_mean: f64,
}

impl DetectorModel {
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_mean: 0.0,
        }
    }

    pub fn with_efficiency(efficiency: f64) -> Self {
        Self {
            efficiency,
            dark_mean: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(invalid(format!("detector efficiency must lie in [0,1], got {}", self.efficiency)));
        }
        if !(self.dark_mean >= 0.0) || !self.dark_mean.is_finite() {
            return Err(invalid(format!("dark_mean must be finite and >= 0, got {}", self.dark_mean)));
        }
        Ok(())
    }
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::ideal()
    }
}

pub const DEFAULT_RING_POINTS: usize = 64;
pub const MIN_RING_POINTS: usize = 8;

fn default_clones() -> usize {
    2
}

fn default_ring_points() -> usize {
    DEFAULT_RING_POINTS
}

/// All protocol parameters of one cloner run.
///
/// `x` is the displacement amplitude in units of `|alpha|`; `threshold` is the
/// herald condition "at least `threshold` counts" (so 0 always succeeds);
/// `tap_reflectivity` is the power fraction sent to the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClonerConfig {
    pub alpha: ComplexAmplitude,
    pub x: f64,
    pub threshold: u32,
    pub tap_reflectivity: f64,
    #[serde(default)]
    pub detector: DetectorModel,
    #[serde(default = "default_clones")]
    pub n_clones: usize,
    #[serde(default = "default_ring_points")]
    pub ring_points: usize,
}

impl ClonerConfig {
    /// Two clones, ideal detector, no tap, default ring discretization.
    pub fn new(alpha: ComplexAmplitude, x: f64, threshold: u32) -> Self {
        Self {
            alpha,
            x,
            threshold,
            tap_reflectivity: 0.0,
            detector: DetectorModel::ideal(),
            n_clones: 2,
            ring_points: DEFAULT_RING_POINTS,
        }
    }

    /// Parameters of the experiment: 17% tap, 63% detector efficiency.
    pub fn experimental(alpha: f64, x: f64, threshold: u32) -> Self {
        Self {
            tap_reflectivity: 0.17,
            detector: DetectorModel::with_efficiency(0.63),
            ..Self::new(ComplexAmplitude::real(alpha), x, threshold)
        }
    }

    pub fn with_alpha(mut self, alpha: ComplexAmplitude) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_x(mut self, x: f64) -> Self {
        self.x = x;
        self
    }

    pub fn with_threshold(mut self, threshold: u32) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_tap(mut self, r: f64) -> Self {
        self.tap_reflectivity = r;
        self
    }

    pub fn with_detector(mut self, detector: DetectorModel) -> Self {
        self.detector = detector;
        self
    }

    pub fn with_ring_points(mut self, k: usize) -> Self {
        self.ring_points = k;
        self
    }

    pub fn with_clones(mut self, c: usize) -> Self {
        self.n_clones = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate("alpha")?;
        if !(self.x >= 0.0) || !(self.x * self.alpha.norm()).is_finite() {
            return Err(invalid(format!("x must be >= 0 with x|alpha| finite, got {}", self.x)));
        }
        if !(0.0..1.0).contains(&self.tap_reflectivity) {
            return Err(invalid(format!(
                "tap_reflectivity must lie in [0,1), got {}",
                self.tap_reflectivity
            )));
        }
        self.detector.validate()?;
        if self.n_clones < 2 {
            return Err(invalid(format!("n_clones must be >= 2, got {}", self.n_clones)));
        }
        if self.ring_points < MIN_RING_POINTS {
            return Err(invalid(format!(
                "ring_points must be >= {MIN_RING_POINTS}, got {}",
                self.ring_points
            )));
        }
        Ok(())
    }

    /// Mean detected photon number for a displaced amplitude `gamma`.
    pub fn detected_mean(&self, gamma: ComplexAmplitude) -> f64 {
        self.detector.efficiency * self.tap_reflectivity * gamma.norm_sqr() + self.detector.dark_mean
    }

    /// Amplitude scale from the displaced mode to one clone, `sqrt((1-R)/c)`.
    pub fn clone_scale(&self) -> f64 {
        ((1.0 - self.tap_reflectivity) / self.n_clones as f64).sqrt()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
