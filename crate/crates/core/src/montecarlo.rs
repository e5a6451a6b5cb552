//! Pulse-by-pulse emulation of the experiment. Every pulse gets a random
//! displacement phase, a Poisson photon count at the tap and one homodyne
//! draw per clone. Heralding is not applied at generation time; thresholds
//! are chosen afterwards with [`reherald`].
//!
//! Pulses are generated in chunks of [`CHUNK_PULSES`]. Chunk `c` draws from
//! ChaCha8 seeded with the run seed on stream `c`, so output is identical for
//! any number of worker threads.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, TAU};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ClonerConfig;
use crate::error::{invalid, ClonerError, Result};
use crate::format::fmt_f64;
use crate::metrics::CovarianceReport;
use crate::states::{ComplexAmplitude, SQRT_2};

pub const CHUNK_PULSES: u64 = 65_536;
/// Two LO phases are considered equal within this tolerance (mod 2 pi).
pub const PHASE_MATCH_TOL: f64 = 1e-9;

pub const HEADER_FILE: &str = "header.json";
pub const PULSES_FILE: &str = "pulses.csv";
pub const HOMODYNE_FILE: &str = "homodyne.csv";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub pulse_id: u64,
    pub phi: f64,
    pub gamma: ComplexAmplitude,
    pub n_detected: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneRecord {
    pub pulse_id: u64,
    pub clone_index: u8,
    pub theta: f64,
    pub value: f64,
}

/// Local-oscillator phase per pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoSchedule {
    /// `theta_t = pi (1 + sin(2 pi t / period))`, shared by both clones.
    Harmonic {
        #[serde(default = "default_period")]
        period: u64,
    },
    /// `theta ~ U[0, pi)`, shared by both clones.
    Uniform,
    /// Phase-locked to the input: pulse `t` uses the configuration `t mod 4`
    /// of `(theta_1, theta_2) - arg(alpha)` in `(0,0), (pi/2,pi/2), (0,pi/2), (pi/2,0)`.
    Locked,
}

fn default_period() -> u64 {
    1000
}

impl Default for LoSchedule {
    fn default() -> Self {
        LoSchedule::Harmonic { period: default_period() }
    }
}

impl LoSchedule {
    fn validate(&self) -> Result<()> {
        match self {
            LoSchedule::Harmonic { period: 0 } => Err(invalid("harmonic LO period must be >= 1")),
            _ => Ok(()),
        }
    }
}

const LOCKED_CONFIGS: [(f64, f64); 4] = [(0.0, 0.0), (FRAC_PI_2, FRAC_PI_2), (0.0, FRAC_PI_2), (FRAC_PI_2, 0.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ExperimentHeader {
    config: ClonerConfig,
    n_pulses: u64,
    rng_seed: u64,
    schedule: LoSchedule,
    #[serde(default)]
    min_stored_count: u64,
}

/// Simulated run. Only pulses with `n_detected >= min_stored_count` are kept;
/// `homodyne` holds the clone 1 and clone 2 draws of `pulses[i]` at
/// positions `2i` and `2i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    pub config: ClonerConfig,
    pub n_pulses: u64,
    pub rng_seed: u64,
    pub schedule: LoSchedule,
    pub min_stored_count: u64,
    pub pulses: Vec<PulseRecord>,
    pub homodyne: Vec<HomodyneRecord>,
}

fn lo_phases(schedule: LoSchedule, pulse_id: u64, alpha_arg: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    match schedule {
        LoSchedule::Harmonic { period } => {
            let phase = TAU * (pulse_id % period) as f64 / period as f64;
            let t = PI * (1.0 + phase.sin());
            (t, t)
        }
        LoSchedule::Uniform => {
            let t = rng.gen::<f64>() * PI;
            (t, t)
        }
        LoSchedule::Locked => {
            let (a, b) = LOCKED_CONFIGS[(pulse_id % 4) as usize];
            (a + alpha_arg, b + alpha_arg)
        }
    }
}

fn homodyne_draw(mu: ComplexAmplitude, theta: f64, rng: &mut ChaCha8Rng) -> f64 {
    let mean = SQRT_2 * mu.rotate(-theta).re;
    let noise: f64 = rng.sample(StandardNormal);
    mean + FRAC_1_SQRT_2 * noise
}

type Chunk = (Vec<PulseRecord>, Vec<HomodyneRecord>);

fn generate_chunk(cfg: &ClonerConfig, n_pulses: u64, seed: u64, schedule: LoSchedule, min_count: u64, chunk: u64) -> Chunk {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let start = chunk * CHUNK_PULSES;
    let end = (start + CHUNK_PULSES).min(n_pulses);
    let radius = cfg.x * cfg.alpha.norm();
    let alpha_arg = cfg.alpha.arg();
    let scale = cfg.clone_scale();
    let mut pulses = Vec::new();
    let mut homodyne = Vec::new();
    for pulse_id in start..end {
        let phi = rng.gen::<f64>() * TAU;
        let gamma = cfg.alpha + ComplexAmplitude::from_polar(radius, phi);
        let mean = cfg.detected_mean(gamma);
        let n_detected = if mean > 0.0 {
            Poisson::new(mean).expect("positive finite mean").sample(&mut rng) as u64
        } else {
            0
        };
        let (t1, t2) = lo_phases(schedule, pulse_id, alpha_arg, &mut rng);
        let mu = gamma.scale(scale);
        let v1 = homodyne_draw(mu, t1, &mut rng);
        let v2 = homodyne_draw(mu, t2, &mut rng);
        if n_detected >= min_count {
            pulses.push(PulseRecord {
                pulse_id,
                phi,
                gamma,
                n_detected,
            });
            homodyne.push(HomodyneRecord {
                pulse_id,
                clone_index: 1,
                theta: t1,
                value: v1,
            });
            homodyne.push(HomodyneRecord {
                pulse_id,
                clone_index: 2,
                theta: t2,
                value: v2,
            });
        }
    }
    (pulses, homodyne)
}

/// Simulates `n_pulses` pulses and stores all of them.
pub fn run_experiment(cfg: &ClonerConfig, n_pulses: u64, seed: u64, schedule: LoSchedule) -> Result<ExperimentData> {
    run_experiment_filtered(cfg, n_pulses, seed, schedule, 0)
}

/// As [`run_experiment`], but keeps only pulses with at least
/// `min_stored_count` detected photons. The random stream is the same, so
/// the kept records equal the corresponding records of the unfiltered run.
pub fn run_experiment_filtered(
    cfg: &ClonerConfig,
    n_pulses: u64,
    seed: u64,
    schedule: LoSchedule,
    min_stored_count: u64,
) -> Result<ExperimentData> {
    cfg.validate()?;
    schedule.validate()?;
    if n_pulses == 0 {
        return Err(invalid("n_pulses must be >= 1"));
    }
    if cfg.n_clones != 2 {
        return Err(invalid(format!(
            "the homodyne emulation measures two clones, config has {}",
            cfg.n_clones
        )));
    }
    let n_chunks = n_pulses.div_ceil(CHUNK_PULSES);
    let gen = |c: u64| generate_chunk(cfg, n_pulses, seed, schedule, min_stored_count, c);
    #[cfg(feature = "parallel")]
    let chunks: Vec<Chunk> = (0..n_chunks).into_par_iter().map(gen).collect();
    #[cfg(not(feature = "parallel"))]
    let chunks: Vec<Chunk> = (0..n_chunks).map(gen).collect();
    let mut pulses = Vec::new();
    let mut homodyne = Vec::new();
    for (p, h) in chunks {
        pulses.extend(p);
        homodyne.extend(h);
    }
    log::debug!("generated {n_pulses} pulses, stored {}", pulses.len());
    Ok(ExperimentData {
        config: *cfg,
        n_pulses,
        rng_seed: seed,
        schedule,
        min_stored_count,
        pulses,
        homodyne,
    })
}

impl ExperimentData {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.schedule.validate()?;
        if self.homodyne.len() != 2 * self.pulses.len() {
            return Err(invalid(format!(
                "{} pulses need {} homodyne records, found {}",
                self.pulses.len(),
                2 * self.pulses.len(),
                self.homodyne.len()
            )));
        }
        let mut last: Option<u64> = None;
        for (i, p) in self.pulses.iter().enumerate() {
            if last.is_some_and(|l| p.pulse_id <= l) || p.pulse_id >= self.n_pulses {
                return Err(invalid(format!(
                    "pulse ids must be increasing and below n_pulses (row {i}, id {})",
                    p.pulse_id
                )));
            }
            last = Some(p.pulse_id);
            if p.n_detected < self.min_stored_count {
                return Err(invalid(format!("pulse {} has fewer counts than min_stored_count", p.pulse_id)));
            }
            if !(0.0..TAU).contains(&p.phi) || !p.gamma.is_finite() {
                return Err(invalid(format!("pulse {} has invalid phi or gamma", p.pulse_id)));
            }
            for (k, h) in self.homodyne[2 * i..2 * i + 2].iter().enumerate() {
                if h.pulse_id != p.pulse_id || h.clone_index as usize != k + 1 {
                    return Err(invalid(format!(
                        "homodyne row {} does not match pulse {} clone {}",
                        2 * i + k,
                        p.pulse_id,
                        k + 1
                    )));
                }
                if !h.theta.is_finite() || !h.value.is_finite() {
                    return Err(invalid(format!("homodyne row {} is not finite", 2 * i + k)));
                }
            }
        }
        Ok(())
    }

    fn header(&self) -> ExperimentHeader {
        ExperimentHeader {
            config: self.config,
            n_pulses: self.n_pulses,
            rng_seed: self.rng_seed,
            schedule: self.schedule,
            min_stored_count: self.min_stored_count,
        }
    }

    /// Writes `header.json`, `pulses.csv` and `homodyne.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let header = File::create(dir.join(HEADER_FILE))?;
        serde_json::to_writer_pretty(BufWriter::new(header), &self.header())?;

        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(PULSES_FILE))?));
        w.write_record(["pulse_id", "phi", "re_gamma", "im_gamma", "n_detected"])?;
        for p in &self.pulses {
            w.write_record([
                p.pulse_id.to_string(),
                fmt_f64(p.phi),
                fmt_f64(p.gamma.re),
                fmt_f64(p.gamma.im),
                p.n_detected.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(HOMODYNE_FILE))?));
        w.write_record(["pulse_id", "clone_index", "theta", "value"])?;
        for h in &self.homodyne {
            w.write_record([
                h.pulse_id.to_string(),
                h.clone_index.to_string(),
                fmt_f64(h.theta),
                fmt_f64(h.value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let header: ExperimentHeader = serde_json::from_reader(BufReader::new(File::open(dir.join(HEADER_FILE))?))?;

        #[derive(Deserialize)]
        struct PulseRow {
            pulse_id: u64,
            phi: f64,
            re_gamma: f64,
            im_gamma: f64,
            n_detected: u64,
        }
        let mut r = csv::Reader::from_reader(BufReader::new(File::open(dir.join(PULSES_FILE))?));
        let pulses = r
            .deserialize::<PulseRow>()
            .map(|row| {
                row.map(|p| PulseRecord {
                    pulse_id: p.pulse_id,
                    phi: p.phi,
                    gamma: ComplexAmplitude::new(p.re_gamma, p.im_gamma),
                    n_detected: p.n_detected,
                })
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut r = csv::Reader::from_reader(BufReader::new(File::open(dir.join(HOMODYNE_FILE))?));
        let homodyne = r.deserialize::<HomodyneRecord>().collect::<std::result::Result<Vec<_>, _>>()?;

        let data = ExperimentData {
            config: header.config,
            n_pulses: header.n_pulses,
            rng_seed: header.rng_seed,
            schedule: header.schedule,
            min_stored_count: header.min_stored_count,
            pulses,
            homodyne,
        };
        data.validate()?;
        Ok(data)
    }
}

/// A sample estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub standard_error: f64,
    pub count: usize,
}

impl Estimate {
    /// `|value - truth|` in units of the standard error.
    pub fn z_score(&self, truth: f64) -> f64 {
        let d = (self.value - truth).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.standard_error
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: Estimate,
    pub variance: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCovariance {
    pub covariance: CovarianceReport,
    pub standard_errors: CovarianceReport,
    /// Pulses used for `x1x2, p1p2, x1p2, p1x2`.
    pub counts: [usize; 4],
}

fn mean_estimate(values: &[f64]) -> Estimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    Estimate {
        value: mean,
        standard_error: (var / n as f64).sqrt(),
        count: n,
    }
}

fn moments(values: &[f64]) -> MomentEstimate {
    let mean = mean_estimate(values);
    let n = values.len() as f64;
    let dev2: Vec<f64> = values.iter().map(|v| (v - mean.value).powi(2)).collect();
    let var = dev2.iter().sum::<f64>() / (n - 1.0);
    let spread = mean_estimate(&dev2);
    MomentEstimate {
        mean,
        variance: Estimate {
            value: var,
            standard_error: spread.standard_error,
            count: values.len(),
        },
    }
}

fn sample_covariance(pairs: &[(f64, f64)]) -> (f64, f64) {
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let products: Vec<f64> = pairs.iter().map(|(a, b)| (a - ma) * (b - mb)).collect();
    let cov = products.iter().sum::<f64>() / (n - 1.0);
    (cov, mean_estimate(&products).standard_error)
}

fn same_phase(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(TAU);
    d < PHASE_MATCH_TOL || TAU - d < PHASE_MATCH_TOL
}

/// Pulses of one experiment that pass a threshold.
#[derive(Debug, Clone)]
pub struct HeraldedView<'a> {
    pub data: &'a ExperimentData,
    pub threshold: u64,
    indices: Vec<usize>,
}

/// Selects stored pulses with `n_detected >= m`. Thresholds below the
/// experiment's `min_stored_count` are rejected, since those pulses were
/// never stored.
pub fn reherald(data: &ExperimentData, m: u64) -> Result<HeraldedView<'_>> {
    if m < data.min_stored_count {
        return Err(invalid(format!(
            "threshold {m} is below the stored minimum {}",
            data.min_stored_count
        )));
    }
    let indices = data
        .pulses
        .iter()
        .enumerate()
        .filter(|(_, p)| p.n_detected >= m)
        .map(|(i, _)| i)
        .collect();
    Ok(HeraldedView {
        data,
        threshold: m,
        indices,
    })
}

impl<'a> HeraldedView<'a> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn pulse_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.indices.iter().map(|&i| self.data.pulses[i].pulse_id)
    }

    pub fn pulses(&self) -> impl Iterator<Item = &'a PulseRecord> + '_ {
        self.indices.iter().map(|&i| &self.data.pulses[i])
    }

    /// Heralded fraction of all generated pulses, binomial standard error.
    pub fn success_rate(&self) -> Estimate {
        let n = self.data.n_pulses as f64;
        let p = self.len() as f64 / n;
        Estimate {
            value: p,
            standard_error: (p * (1.0 - p) / n).sqrt(),
            count: self.data.n_pulses as usize,
        }
    }

    fn pair(&self, i: usize) -> (&'a HomodyneRecord, &'a HomodyneRecord) {
        let h = &self.data.homodyne;
        (&h[2 * i], &h[2 * i + 1])
    }

    fn record(&self, i: usize, clone: u8) -> &'a HomodyneRecord {
        let (a, b) = self.pair(i);
        if clone == 1 {
            a
        } else {
            b
        }
    }

    /// `(theta, value)` homodyne samples of one clone.
    pub fn clone_samples(&self, clone: u8) -> Result<Vec<(f64, f64)>> {
        check_clone(clone)?;
        Ok(self
            .indices
            .iter()
            .map(|&i| self.record(i, clone))
            .map(|h| (h.theta, h.value))
            .collect())
    }

    /// Mean and variance of `X_theta` of one clone, from the samples taken at LO phase `theta`.
    pub fn quadrature_moments(&self, clone: u8, theta: f64) -> Result<MomentEstimate> {
        check_clone(clone)?;
        let values: Vec<f64> = self
            .indices
            .iter()
            .map(|&i| self.record(i, clone))
            .filter(|h| same_phase(h.theta, theta))
            .map(|h| h.value)
            .collect();
        if values.len() < 2 {
            return Err(ClonerError::InsufficientSamples(format!(
                "{} heralded samples of clone {clone} at theta = {theta}",
                values.len()
            )));
        }
        Ok(moments(&values))
    }

    /// Clone-clone covariances in the frame of the input phase, from pulses
    /// whose LO phases match each of the four configurations.
    pub fn covariance(&self) -> Result<EmpiricalCovariance> {
        let base = self.data.config.alpha.arg();
        let mut est = [(0.0, 0.0); 4];
        let mut counts = [0usize; 4];
        for (k, (a, b)) in LOCKED_CONFIGS.iter().enumerate() {
            let pairs: Vec<(f64, f64)> = self
                .indices
                .iter()
                .map(|&i| self.pair(i))
                .filter(|(h1, h2)| same_phase(h1.theta, a + base) && same_phase(h2.theta, b + base))
                .map(|(h1, h2)| (h1.value, h2.value))
                .collect();
            if pairs.len() < 2 {
                return Err(ClonerError::InsufficientSamples(format!(
                    "{} heralded pulses at LO configuration ({a}, {b}); covariances need the locked schedule",
                    pairs.len()
                )));
            }
            counts[k] = pairs.len();
            est[k] = sample_covariance(&pairs);
        }
        let report = |f: fn((f64, f64)) -> f64| CovarianceReport {
            cov_x1x2: f(est[0]),
            cov_p1p2: f(est[1]),
            cov_x1p2: f(est[2]),
            cov_p1x2: f(est[3]),
        };
        Ok(EmpiricalCovariance {
            covariance: report(|e| e.0),
            standard_errors: report(|e| e.1),
            counts,
        })
    }

    /// `<alpha|rho_clone|alpha>` averaged over heralded pulses from their stored displaced amplitudes.
    pub fn fidelity(&self) -> Result<Estimate> {
        if self.len() < 2 {
            return Err(ClonerError::InsufficientSamples(format!("{} heralded pulses", self.len())));
        }
        let cfg = &self.data.config;
        let scale = cfg.clone_scale();
        let overlaps: Vec<f64> = self
            .pulses()
            .map(|p| (-(cfg.alpha + p.gamma.scale(-scale)).norm_sqr()).exp())
            .collect();
        Ok(mean_estimate(&overlaps))
    }
}

fn check_clone(clone: u8) -> Result<()> {
    if clone == 1 || clone == 2 {
        Ok(())
    } else {
        Err(invalid(format!("clone index must be 1 or 2, got {clone}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::apply_cloner;
    use crate::metrics::covariance_matrix;

    #[test]
    fn vacuum_run() {
        let cfg = ClonerConfig::experimental(0.0, 0.0, 0);
        let data = run_experiment(&cfg, 50_000, 7, LoSchedule::Uniform).unwrap();
        assert!(data.pulses.iter().all(|p| p.n_detected == 0));
        let view = reherald(&data, 0).unwrap();
        let values: Vec<f64> = view.clone_samples(1).unwrap().into_iter().map(|s| s.1).collect();
        let m = moments(&values);
        assert!(m.mean.z_score(0.0) < 3.0);
        assert!(m.variance.z_score(0.5) < 3.0, "{m:?}");
    }

    #[test]
    fn deterministic_and_chunked() {
        let cfg = ClonerConfig::experimental(1.0, 0.5, 0);
        let n = CHUNK_PULSES + 1000;
        let a = run_experiment(&cfg, n, 3, LoSchedule::default()).unwrap();
        let b = run_experiment(&cfg, n, 3, LoSchedule::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pulses.len() as u64, n);
        let c = run_experiment(&cfg, n, 4, LoSchedule::default()).unwrap();
        assert_ne!(a.pulses[0], c.pulses[0]);
        // chunks use distinct streams
        assert_ne!(a.pulses[0].phi, a.pulses[CHUNK_PULSES as usize].phi);
    }

    #[test]
    fn filtered_run_keeps_the_same_records() {
        let cfg = ClonerConfig::experimental(1.0, 0.5, 0);
        let full = run_experiment(&cfg, 20_000, 11, LoSchedule::Locked).unwrap();
        let kept = run_experiment_filtered(&cfg, 20_000, 11, LoSchedule::Locked, 2).unwrap();
        let view = reherald(&full, 2).unwrap();
        assert_eq!(view.pulses().copied().collect::<Vec<_>>(), kept.pulses);
        assert_eq!(reherald(&kept, 2).unwrap().success_rate().value, view.success_rate().value);
        assert!(reherald(&kept, 1).is_err());
    }

    #[test]
    fn reherald_basics() {
        let cfg = ClonerConfig::experimental(1.0, 0.5, 0);
        let data = run_experiment(&cfg, 30_000, 5, LoSchedule::Uniform).unwrap();
        assert_eq!(reherald(&data, 0).unwrap().len(), data.pulses.len());
        let top = data.pulses.iter().map(|p| p.n_detected).max().unwrap();
        let empty = reherald(&data, top + 1).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.success_rate().value, 0.0);
        let m2: Vec<u64> = reherald(&data, 2).unwrap().pulse_ids().collect();
        let m3: Vec<u64> = reherald(&data, 3).unwrap().pulse_ids().collect();
        assert!(m3.iter().all(|id| m2.binary_search(id).is_ok()));
    }

    #[test]
    fn herald_rate_matches_analytic() {
        let cfg = ClonerConfig::experimental(1.0, 0.5, 1);
        let data = run_experiment(&cfg, 300_000, 21, LoSchedule::Uniform).unwrap();
        let rate = reherald(&data, 1).unwrap().success_rate();
        let truth = apply_cloner(&cfg).unwrap().success_probability.unwrap();
        assert!(rate.z_score(truth) < 3.0, "{rate:?} vs {truth}");
    }

    #[test]
    fn locked_covariances_match_analytic() {
        let cfg = ClonerConfig::experimental(1.36, 0.5, 0);
        let data = run_experiment(&cfg, 400_000, 2, LoSchedule::Locked).unwrap();
        let emp = reherald(&data, 0).unwrap().covariance().unwrap();
        let truth = covariance_matrix(&apply_cloner(&cfg).unwrap()).unwrap();
        let pairs = [
            (emp.covariance.cov_x1x2, emp.standard_errors.cov_x1x2, truth.cov_x1x2),
            (emp.covariance.cov_p1p2, emp.standard_errors.cov_p1p2, truth.cov_p1p2),
            (emp.covariance.cov_x1p2, emp.standard_errors.cov_x1p2, 0.0),
            (emp.covariance.cov_p1x2, emp.standard_errors.cov_p1x2, 0.0),
        ];
        for (v, se, t) in pairs {
            assert!((v - t).abs() < 3.0 * se, "{v} +- {se} vs {t}");
        }

        let var = reherald(&data, 0).unwrap().quadrature_moments(1, 0.0).unwrap().variance;
        let spread = 0.415 * (0.5f64 * 1.36).powi(2);
        assert!(var.z_score(0.5 + spread) < 3.0, "{var:?}");
    }

    #[test]
    fn covariance_needs_locked_pairs() {
        let cfg = ClonerConfig::experimental(1.0, 0.5, 0);
        let data = run_experiment(&cfg, 1000, 1, LoSchedule::Uniform).unwrap();
        assert!(matches!(
            reherald(&data, 0).unwrap().covariance(),
            Err(ClonerError::InsufficientSamples(_))
        ));
    }

    #[test]
    fn empirical_fidelity_rises_with_threshold() {
        let cfg = ClonerConfig::experimental(1.0, 0.5, 0);
        let data = run_experiment(&cfg, 200_000, 9, LoSchedule::Uniform).unwrap();
        let f: Vec<Estimate> = (0..=4).map(|m| reherald(&data, m).unwrap().fidelity().unwrap()).collect();
        for w in f.windows(2) {
            let tol = 3.0 * (w[0].standard_error.powi(2) + w[1].standard_error.powi(2)).sqrt();
            assert!(w[1].value >= w[0].value - tol);
        }
    }

    #[test]
    fn files_round_trip() {
        let cfg = ClonerConfig::experimental(0.8, 0.4, 0);
        let data = run_experiment_filtered(&cfg, 5000, 13, LoSchedule::Harmonic { period: 77 }, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        data.write_dir(dir.path()).unwrap();
        let back = ExperimentData::read_dir(dir.path()).unwrap();
        assert_eq!(back, data);

        let header = std::fs::read_to_string(dir.path().join(HEADER_FILE)).unwrap();
        assert!(header.contains("\"kind\": \"harmonic\""));
        let pulses = std::fs::read_to_string(dir.path().join(PULSES_FILE)).unwrap();
        assert!(pulses.starts_with("pulse_id,phi,re_gamma,im_gamma,n_detected\n"));
    }

    #[test]
    fn corrupt_files_rejected() {
        let cfg = ClonerConfig::experimental(0.8, 0.4, 0);
        let mut data = run_experiment(&cfg, 100, 13, LoSchedule::Uniform).unwrap();
        data.homodyne.pop();
        assert!(data.validate().is_err());
        let dir = tempfile::tempdir().unwrap();
        data.write_dir(dir.path()).unwrap();
        assert!(ExperimentData::read_dir(dir.path()).is_err());
    }

    #[test]
    fn rejects_bad_requests() {
        let cfg = ClonerConfig::experimental(1.0, 0.5, 0);
        assert!(run_experiment(&cfg, 0, 1, LoSchedule::Uniform).is_err());
        assert!(run_experiment(&cfg.with_clones(3), 10, 1, LoSchedule::Uniform).is_err());
        assert!(run_experiment(&cfg, 10, 1, LoSchedule::Harmonic { period: 0 }).is_err());
    }
}
