//! Maximum-likelihood state reconstruction from homodyne samples with the
//! iterative `rho <- N[R rho R]` scheme.
//!
//! Samples are folded into `theta in [0, pi)` using `X_{theta+pi} = -X_theta`
//! and binned on a `theta x value` grid. Each bin's POVM element is the
//! quadrature projector integrated over the value bin and averaged over the
//! phase bin, both done exactly.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ClonerError, Result};
use crate::format::fmt_f64;
use crate::special::{gauss_legendre, hermite_functions};
use crate::states::{CMatrix, CVector, DensityMatrix};

pub const DEFAULT_THETA_BINS: usize = 30;
pub const DEFAULT_X_BINS: usize = 100;
pub const DEFAULT_MAX_ITERS: usize = 2000;
/// Stop when the log-likelihood per sample improves by less than this.
pub const DEFAULT_TOL: f64 = 1e-9;
pub const PROBABILITY_FLOOR: f64 = 1e-12;

const NODES_PER_BIN: usize = 10;
const MAX_DILUTION_HALVINGS: usize = 40;

/// `<n|x, theta> = e^{i n theta} psi_n(x)` for `n < dim`.
pub fn quadrature_projector(value: f64, theta: f64, dim: usize) -> CVector {
    let psi = hermite_functions(value, dim);
    CVector::from_iterator(
        dim,
        psi.iter().enumerate().map(|(n, &p)| Complex64::from_polar(p, n as f64 * theta)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub n_theta_bins: usize,
    pub n_x_bins: usize,
    /// Value range after folding; `None` uses the observed range.
    pub x_range: Option<(f64, f64)>,
}

impl Default for BinningSpec {
    fn default() -> Self {
        Self {
            n_theta_bins: DEFAULT_THETA_BINS,
            n_x_bins: DEFAULT_X_BINS,
            x_range: None,
        }
    }
}

fn fold(theta: f64, value: f64) -> (f64, f64) {
    let t = theta.rem_euclid(2.0 * PI);
    if t >= PI {
        ((t - PI).min(PI.next_down()), -value)
    } else {
        (t, value)
    }
}

/// `(theta, value)` homodyne samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSampleSet {
    samples: Vec<(f64, f64)>,
    binning: BinningSpec,
}

impl QuadratureSampleSet {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("sample set is empty"));
        }
        if samples.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(invalid("sample set contains non-finite values"));
        }
        Ok(Self {
            samples,
            binning: BinningSpec::default(),
        })
    }

    pub fn with_binning(mut self, binning: BinningSpec) -> Result<Self> {
        if binning.n_theta_bins == 0 || binning.n_x_bins == 0 {
            return Err(invalid("binning needs at least one bin per axis"));
        }
        if let Some((lo, hi)) = binning.x_range {
            if !(hi > lo) {
                return Err(invalid(format!("x range ({lo}, {hi}) is empty")));
            }
            let (min, max) = self.folded_range();
            if min < lo || max > hi {
                return Err(invalid(format!(
                    "x range ({lo}, {hi}) does not cover observed values ({min}, {max})"
                )));
            }
        }
        self.binning = binning;
        Ok(self)
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn binning(&self) -> BinningSpec {
        self.binning
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn folded_range(&self) -> (f64, f64) {
        self.samples
            .iter()
            .map(|&(t, v)| fold(t, v).1)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    fn x_range(&self) -> (f64, f64) {
        self.binning.x_range.unwrap_or_else(|| {
            let (lo, hi) = self.folded_range();
            let pad = 1e-9 * (hi - lo).max(1.0);
            (lo - pad, hi + pad)
        })
    }
}

/// Occupied bins: phase-bin center, value-bin edges, count.
struct Histogram {
    theta_width: f64,
    bins: Vec<(f64, f64, f64, f64)>,
    theta_bins_used: usize,
}

fn histogram(set: &QuadratureSampleSet) -> Histogram {
    let spec = set.binning;
    let (lo, hi) = set.x_range();
    let dt = PI / spec.n_theta_bins as f64;
    let dx = (hi - lo) / spec.n_x_bins as f64;
    let mut counts = vec![0u64; spec.n_theta_bins * spec.n_x_bins];
    for &(t, v) in &set.samples {
        let (t, v) = fold(t, v);
        let ti = ((t / dt) as usize).min(spec.n_theta_bins - 1);
        let xi = (((v - lo) / dx) as usize).min(spec.n_x_bins - 1);
        counts[ti * spec.n_x_bins + xi] += 1;
    }
    let mut theta_used = vec![false; spec.n_theta_bins];
    let mut bins = Vec::new();
    for (idx, &c) in counts.iter().enumerate() {
        if c > 0 {
            let (ti, xi) = (idx / spec.n_x_bins, idx % spec.n_x_bins);
            theta_used[ti] = true;
            let x0 = lo + dx * xi as f64;
            bins.push(((ti as f64 + 0.5) * dt, x0, x0 + dx, c as f64));
        }
    }
    Histogram {
        theta_width: dt,
        bins,
        theta_bins_used: theta_used.iter().filter(|u| **u).count(),
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// POVM element for phase bin centered at `theta_c` of width `dtheta` and
/// value bin `[a, b]`:
/// `[m, n] = int_a^b psi_m psi_n dx * e^{i(m-n) theta_c} sinc((m-n) dtheta / 2)`.
fn bin_povm(theta_c: f64, dtheta: f64, a: f64, b: f64, dim: usize, gl: &(Vec<f64>, Vec<f64>)) -> CMatrix {
    let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
    let mut g = vec![0.0; dim * dim];
    for (t, w) in gl.0.iter().zip(&gl.1) {
        let psi = hermite_functions(mid + half * t, dim);
        let wq = half * w;
        for m in 0..dim {
            for n in 0..dim {
                g[m * dim + n] += wq * psi[m] * psi[n];
            }
        }
    }
    CMatrix::from_fn(dim, dim, |m, n| {
        let d = m as f64 - n as f64;
        Complex64::from_polar(g[m * dim + n] * sinc(0.5 * d * dtheta), d * theta_c)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub rho: DensityMatrix,
    /// Log-likelihood per sample, starting with the initial state.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

impl TomographyResult {
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "log_likelihood"])?;
        for (i, l) in self.log_likelihood_trace.iter().enumerate() {
            w.write_record([i.to_string(), fmt_f64(*l)])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Problem {
    /// Transposed POVM elements, so `tr(rho Pi) = sum rho .* Pi^T`.
    povm_t: Vec<CMatrix>,
    freqs: Vec<f64>,
}

impl Problem {
    fn probabilities(&self, rho: &CMatrix) -> Vec<f64> {
        #[cfg(feature = "parallel")]
        let it = self.povm_t.par_iter();
        #[cfg(not(feature = "parallel"))]
        let it = self.povm_t.iter();
        it.map(|p| rho.dot(p).re).collect()
    }

    fn log_likelihood(&self, probs: &[f64]) -> f64 {
        self.freqs.iter().zip(probs).map(|(f, p)| f * p.max(PROBABILITY_FLOOR).ln()).sum()
    }

    fn r_operator(&self, probs: &[f64]) -> CMatrix {
        let dim = self.povm_t[0].nrows();
        let mut r = CMatrix::zeros(dim, dim);
        let mut floored = 0usize;
        for ((p_t, f), &p) in self.povm_t.iter().zip(&self.freqs).zip(probs) {
            if p < PROBABILITY_FLOOR {
                floored += 1;
            }
            let s = f / p.max(PROBABILITY_FLOOR);
            r.zip_apply(p_t, |acc, e| *acc += e * s);
        }
        if floored > 0 {
            log::warn!("{floored} bin probabilities floored at {PROBABILITY_FLOOR}");
        }
        r.transpose()
    }
}

fn rrr_step(r: &CMatrix, rho: &CMatrix) -> CMatrix {
    let m = r * rho * r;
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = m.trace().re;
    m / Complex64::new(tr, 0.0)
}

/// Reconstructs a `dim`-level density matrix. Starts from the maximally
/// mixed state. When a full `R rho R` step would lower the likelihood, the
/// diluted operator `(I + eps R) / (1 + eps)` is used with `eps` halved until
/// the likelihood does not drop. Stops after `max_iters` steps or when the
/// per-sample gain falls below `tol`.
pub fn maxlik_reconstruct(set: &QuadratureSampleSet, dim: usize, max_iters: usize, tol: f64) -> Result<TomographyResult> {
    if dim == 0 {
        return Err(invalid("reconstruction dimension must be >= 1"));
    }
    let hist = histogram(set);
    if hist.theta_bins_used < 3 {
        return Err(ClonerError::DegenerateSamples(format!(
            "samples occupy {} phase bins, need at least 3",
            hist.theta_bins_used
        )));
    }
    let total = set.len() as f64;
    let gl = gauss_legendre(NODES_PER_BIN);
    let build = |&(tc, a, b, _): &(f64, f64, f64, f64)| bin_povm(tc, hist.theta_width, a, b, dim, &gl).transpose();
    #[cfg(feature = "parallel")]
    let povm_t: Vec<CMatrix> = hist.bins.par_iter().map(build).collect();
    #[cfg(not(feature = "parallel"))]
    let povm_t: Vec<CMatrix> = hist.bins.iter().map(build).collect();
    let problem = Problem {
        povm_t,
        freqs: hist.bins.iter().map(|b| b.3 / total).collect(),
    };

    let mut rho = DensityMatrix::maximally_mixed(dim).into_matrix();
    let mut probs = problem.probabilities(&rho);
    let mut ll = problem.log_likelihood(&probs);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let identity = CMatrix::identity(dim, dim);

    while iterations < max_iters {
        iterations += 1;
        let r = problem.r_operator(&probs);
        let mut candidate = rrr_step(&r, &rho);
        let mut cand_probs = problem.probabilities(&candidate);
        let mut cand_ll = problem.log_likelihood(&cand_probs);
        let mut eps = 1.0;
        let mut halvings = 0;
        while cand_ll < ll && halvings < MAX_DILUTION_HALVINGS {
            let diluted = (&identity + &r * Complex64::new(eps, 0.0)) / Complex64::new(1.0 + eps, 0.0);
            candidate = rrr_step(&diluted, &rho);
            cand_probs = problem.probabilities(&candidate);
            cand_ll = problem.log_likelihood(&cand_probs);
            eps *= 0.5;
            halvings += 1;
        }
        if cand_ll < ll {
            // no ascent direction within floating-point resolution
            converged = true;
            break;
        }
        let gain = cand_ll - ll;
        rho = candidate;
        probs = cand_probs;
        ll = cand_ll;
        trace.push(ll);
        if gain < tol {
            converged = true;
            break;
        }
    }
    log::debug!("maxlik: {iterations} iterations, converged = {converged}, log-likelihood {ll}");
    Ok(TomographyResult {
        rho: DensityMatrix::from_raw_normalized(rho)?,
        log_likelihood_trace: trace,
        iterations_used: iterations,
        converged,
    })
}

const EIGEN_FLOOR: f64 = 1e-13;

fn matrix_sqrt(m: &CMatrix) -> CMatrix {
    let eig = m.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let s = CMatrix::from_diagonal(&CVector::from_iterator(
        m.nrows(),
        eig.eigenvalues
            .iter()
            .map(|&l| Complex64::new(if l > EIGEN_FLOOR { l.sqrt() } else { 0.0 }, 0.0)),
    ));
    v * s * v.adjoint()
}

/// Uhlmann fidelity `(tr sqrt(sqrt(a) b sqrt(a)))^2`.
pub fn fidelity_between(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(ClonerError::DimensionMismatch(a.dim(), b.dim()));
    }
    let sa = matrix_sqrt(a.matrix());
    let m = &sa * b.matrix() * &sa;
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let root_sum: f64 = m
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&l| if l > EIGEN_FLOOR { l.sqrt() } else { 0.0 })
        .sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}
