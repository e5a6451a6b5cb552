//! Truncated Fock-space representation: state vectors, density matrices,
//! displacement and photon-loss maps.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::amplitude::ComplexAmplitude;
use super::ensemble::{CoherentEnsemble, QuadratureStats};
use super::SQRT_2;
use crate::error::{invalid, ClonerError, Result};
use crate::special::{laguerre_series, ln_binomial, ln_factorial_table};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const MIN_EIGENVALUE_TOL: f64 = -1e-9;
/// Largest per-member norm deficit accepted when assembling a mixture.
pub const ASSEMBLY_DEFICIT_LIMIT: f64 = 1e-8;

/// Truncation rule `ceil(mu + 6 sqrt(mu) + 10)` for a largest photon number `mu`.
pub fn default_dim(max_photon_number: f64) -> usize {
    let mu = max_photon_number.max(0.0);
    (mu + 6.0 * mu.sqrt() + 10.0).ceil() as usize
}

/// Fock expansion of `|alpha>` truncated to `dim` levels, with its norm deficit
/// `1 - sum |c_n|^2`.
pub fn coherent_fock(alpha: ComplexAmplitude, dim: usize) -> Result<(CVector, f64)> {
    alpha.validate("coherent amplitude")?;
    if dim == 0 {
        return Err(invalid("Fock dimension must be at least 1"));
    }
    let a = alpha.to_complex();
    let mut v = CVector::zeros(dim);
    let mut c = Complex64::new((-0.5 * a.norm_sqr()).exp(), 0.0);
    v[0] = c;
    for n in 1..dim {
        c = c * a / (n as f64).sqrt();
        v[n] = c;
    }
    // sum the tail rather than subtracting from one when it is tiny
    let kept: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    let deficit = (1.0 - kept).max(0.0);
    Ok((v, deficit))
}

/// Matrix elements `<m|D(beta)|n>` on the first `dim` Fock levels.
pub fn displacement_matrix(beta: ComplexAmplitude, dim: usize) -> Result<CMatrix> {
    beta.validate("displacement amplitude")?;
    if dim == 0 {
        return Err(invalid("Fock dimension must be at least 1"));
    }
    let b = beta.to_complex();
    let r2 = b.norm_sqr();
    if r2 == 0.0 {
        return Ok(CMatrix::identity(dim, dim));
    }
    let ln_r = r2.sqrt().ln();
    let phase = b.arg();
    let lnf = ln_factorial_table(dim);
    let mut d = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        let lag = laguerre_series(k, r2, dim - k);
        // e^{i k arg b} below the diagonal, (-b*)^k = (-1)^k e^{-i k arg b} |b|^k above
        let below = Complex64::from_polar(1.0, k as f64 * phase);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let above = Complex64::from_polar(sign, -(k as f64) * phase);
        for (n, l) in lag.iter().enumerate() {
            let magnitude = (0.5 * (lnf[n] - lnf[n + k]) + k as f64 * ln_r - 0.5 * r2).exp() * l;
            d[(n + k, n)] = below * magnitude;
            if k > 0 {
                d[(n, n + k)] = above * magnitude;
            }
        }
    }
    Ok(d)
}

/// A unit-trace, Hermitian, positive semidefinite operator on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates and wraps a matrix.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let rho = Self { matrix };
        rho.validate()?;
        Ok(rho)
    }

    /// Hermitizes and rescales to unit trace without checking positivity.
    pub(crate) fn from_raw_normalized(mut matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(ClonerError::DimensionMismatch(matrix.nrows(), matrix.ncols()));
        }
        matrix = (&matrix + matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let tr = matrix.trace().re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(ClonerError::InvalidState(format!("trace {tr} cannot be normalized")));
        }
        matrix /= Complex64::new(tr, 0.0);
        Ok(Self { matrix })
    }

    pub fn pure(state: &CVector) -> Result<Self> {
        let norm = state.norm();
        if !(norm > 0.0) {
            return Err(ClonerError::InvalidState("zero state vector".into()));
        }
        let v = state / Complex64::new(norm, 0.0);
        Self::from_raw_normalized(&v * v.adjoint())
    }

    pub fn vacuum(dim: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        Self { matrix: m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        let diff = &self.matrix - self.matrix.adjoint();
        diff.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.matrix.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.matrix.is_square() || self.matrix.nrows() == 0 {
            return Err(ClonerError::InvalidState("density matrix must be square and non-empty".into()));
        }
        if self.matrix.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(ClonerError::InvalidState("non-finite matrix element".into()));
        }
        let h = self.hermiticity_error();
        if h > HERMITIAN_TOL {
            return Err(ClonerError::InvalidState(format!("not Hermitian (max deviation {h:.3e})")));
        }
        let t = self.trace();
        if (t - 1.0).abs() > TRACE_TOL {
            return Err(ClonerError::InvalidState(format!("trace {t} differs from 1")));
        }
        let lambda = self.min_eigenvalue();
        if lambda < MIN_EIGENVALUE_TOL {
            return Err(ClonerError::InvalidState(format!("negative eigenvalue {lambda:.3e}")));
        }
        Ok(())
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.matrix[(n, n)].re).collect()
    }

    /// `<alpha| rho |alpha>` with the coherent bra truncated to the same basis.
    pub fn fidelity_with_coherent(&self, alpha: ComplexAmplitude) -> Result<f64> {
        let (v, _) = coherent_fock(alpha, self.dim())?;
        let f = (v.adjoint() * &self.matrix * &v)[(0, 0)].re;
        Ok(f.clamp(0.0, 1.0))
    }

    /// `tr(rho a)`.
    pub fn mean_annihilation(&self) -> Complex64 {
        (1..self.dim()).map(|n| self.matrix[(n, n - 1)] * (n as f64).sqrt()).sum()
    }

    pub fn quadrature_stats(&self) -> QuadratureStats {
        let a = self.mean_annihilation();
        let a2: Complex64 = (2..self.dim())
            .map(|n| self.matrix[(n, n - 2)] * ((n * (n - 1)) as f64).sqrt())
            .sum();
        let nbar: f64 = (0..self.dim()).map(|n| n as f64 * self.matrix[(n, n)].re).sum();
        let mean_x = SQRT_2 * a.re;
        let mean_p = SQRT_2 * a.im;
        let x2 = a2.re + nbar + 0.5;
        let p2 = -a2.re + nbar + 0.5;
        QuadratureStats {
            mean_x,
            mean_p,
            var_x: x2 - mean_x * mean_x,
            var_p: p2 - mean_p * mean_p,
        }
    }

    /// Generalized-Kraus photon loss with transmissivity `eta`.
    pub fn loss_channel(&self, eta: f64) -> Result<DensityMatrix> {
        loss_channel(self, eta)
    }
}

/// Photon loss: `rho'_{mn} = sum_k sqrt(C(m+k,k) C(n+k,k)) eta^{(m+n)/2} (1-eta)^k rho_{m+k,n+k}`.
pub fn loss_channel(rho: &DensityMatrix, eta: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("loss transmissivity must lie in [0,1], got {eta}")));
    }
    let dim = rho.dim();
    if eta == 1.0 {
        return Ok(rho.clone());
    }
    let lnf = ln_factorial_table(dim);
    let src = rho.matrix();
    let mut out = CMatrix::zeros(dim, dim);
    for m in 0..dim {
        for n in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..dim - m.max(n) {
                let ln_coeff = 0.5 * (ln_binomial(&lnf, m + k, k) + ln_binomial(&lnf, n + k, k));
                let factor = ln_coeff.exp() * eta.powf(0.5 * (m + n) as f64) * (1.0 - eta).powi(k as i32);
                acc += src[(m + k, n + k)] * factor;
            }
            out[(m, n)] = acc;
        }
    }
    Ok(DensityMatrix { matrix: out })
}

/// Assembles `sum_i w_i |g_i><g_i|` in a `dim`-level Fock basis.
pub fn ensemble_to_density(e: &CoherentEnsemble, dim: usize) -> Result<DensityMatrix> {
    if dim == 0 {
        return Err(invalid("Fock dimension must be at least 1"));
    }
    let mut m = CMatrix::zeros(dim, dim);
    let mut worst = 0.0f64;
    for member in e.members() {
        let (v, deficit) = coherent_fock(member.amplitude, dim)?;
        if deficit > ASSEMBLY_DEFICIT_LIMIT {
            return Err(ClonerError::Truncation {
                dim,
                deficit,
                limit: ASSEMBLY_DEFICIT_LIMIT,
            });
        }
        worst = worst.max(deficit);
        m.gerc(Complex64::new(member.weight, 0.0), &v, &v, Complex64::new(1.0, 0.0));
    }
    log::debug!("ensemble_to_density: dim {dim}, worst member deficit {worst:.3e}");
    DensityMatrix::from_raw_normalized(m)
}

#[derive(Serialize, Deserialize)]
struct RawDensityMatrix {
    dim: usize,
    elements: Vec<[f64; 2]>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let dim = self.dim();
        let mut elements = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                let z = self.matrix[(r, c)];
                elements.push([z.re, z.im]);
            }
        }
        RawDensityMatrix { dim, elements }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawDensityMatrix::deserialize(d)?;
        if raw.elements.len() != raw.dim * raw.dim {
            return Err(serde::de::Error::custom(format!(
                "expected {} elements for dim {}, got {}",
                raw.dim * raw.dim,
                raw.dim,
                raw.elements.len()
            )));
        }
        let m = CMatrix::from_row_iterator(raw.dim, raw.dim, raw.elements.iter().map(|[re, im]| Complex64::new(*re, *im)));
        DensityMatrix::new(m).map_err(serde::de::Error::custom)
    }
}
