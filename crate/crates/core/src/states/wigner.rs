//! Phase-space Wigner function on a rectangular grid.

use std::f64::consts::{FRAC_1_PI, SQRT_2};
use std::io::Write;

use num_complex::Complex64;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::CoherentEnsemble;
use super::fock::DensityMatrix;
use crate::error::{invalid, Result};
use crate::format::fmt_f64;
use crate::special::{laguerre_series, ln_factorial_table};

/// Axis bounds and point counts of a sampling grid. Both ends are included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl GridSpec {
    /// Square grid `[-half_width, half_width]^2` with `n` points per axis.
    pub fn square(half_width: f64, n: usize) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            nx: n,
            p_min: -half_width,
            p_max: half_width,
            np: n,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.np == 0 {
            return Err(invalid("Wigner grid must contain at least one point per axis"));
        }
        let ok = |lo: f64, hi: f64, n: usize| lo.is_finite() && hi.is_finite() && (hi > lo || (n == 1 && hi >= lo));
        if !ok(self.x_min, self.x_max, self.nx) || !ok(self.p_min, self.p_max, self.np) {
            return Err(invalid("Wigner grid bounds must be finite with max > min"));
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![lo];
        }
        let step = (hi - lo) / (n - 1) as f64;
        (0..n).map(|i| lo + step * i as f64).collect()
    }
}

/// Anything whose Wigner function can be evaluated pointwise.
pub trait WignerSource {
    fn wigner_at(&self, x: f64, p: f64) -> f64;
}

impl WignerSource for CoherentEnsemble {
    fn wigner_at(&self, x: f64, p: f64) -> f64 {
        self.members()
            .iter()
            .map(|m| {
                let dx = x - SQRT_2 * m.amplitude.re;
                let dp = p - SQRT_2 * m.amplitude.im;
                m.weight * (-dx * dx - dp * dp).exp()
            })
            .sum::<f64>()
            * FRAC_1_PI
    }
}

/// Fock-basis kernel: for `m = n + k`,
/// `W_{|m><n|} = (-1)^n / pi * sqrt(n!/m!) (2 a*)^k e^{-2|a|^2} L_n^{(k)}(4|a|^2)` with `a = (x + ip)/sqrt 2`.
pub struct FockWigner<'a> {
    rho: &'a DensityMatrix,
    ln_fact: Vec<f64>,
}

impl<'a> FockWigner<'a> {
    pub fn new(rho: &'a DensityMatrix) -> Self {
        Self {
            rho,
            ln_fact: ln_factorial_table(rho.dim()),
        }
    }
}

impl WignerSource for FockWigner<'_> {
    fn wigner_at(&self, x: f64, p: f64) -> f64 {
        let dim = self.rho.dim();
        let m = self.rho.matrix();
        let r2 = x * x + p * p; // 2|a|^2
        let four = 2.0 * r2; // 4|a|^2
        let gauss = (-r2).exp();
        // 2 a* = sqrt 2 (x - ip)
        let phase = (-p).atan2(x);
        let ln_mod = if four > 0.0 { 0.5 * four.ln() } else { f64::NEG_INFINITY };
        let mut total = 0.0;
        for k in 0..dim {
            if k > 0 && four == 0.0 {
                break;
            }
            let lag = laguerre_series(k, four, dim - k);
            let rot = Complex64::from_polar(1.0, k as f64 * phase);
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, l) in lag.iter().enumerate() {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let lnmag = 0.5 * (self.ln_fact[n] - self.ln_fact[n + k]) + if k > 0 { k as f64 * ln_mod } else { 0.0 };
                acc += m[(n + k, n)] * (sign * lnmag.exp() * l);
            }
            let term = (acc * rot).re;
            total += if k == 0 { term } else { 2.0 * term };
        }
        total * gauss * FRAC_1_PI
    }
}

impl WignerSource for DensityMatrix {
    fn wigner_at(&self, x: f64, p: f64) -> f64 {
        FockWigner::new(self).wigner_at(x, p)
    }
}

/// Sampled Wigner function; `values[i][j]` is `W(x_axis[i], p_axis[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Evaluates a Wigner function on the grid. Cells are independent, so the
/// result does not depend on how rows are distributed across threads.
pub fn wigner<S: WignerSource + Sync + ?Sized>(state: &S, grid: &GridSpec) -> Result<WignerGrid> {
    grid.validate()?;
    let x_axis = GridSpec::axis(grid.x_min, grid.x_max, grid.nx);
    let p_axis = GridSpec::axis(grid.p_min, grid.p_max, grid.np);
    let row = |x: &f64| p_axis.iter().map(|&p| state.wigner_at(*x, p)).collect::<Vec<f64>>();
    #[cfg(feature = "parallel")]
    let values = x_axis.par_iter().map(row).collect();
    #[cfg(not(feature = "parallel"))]
    let values = x_axis.iter().map(row).collect();
    Ok(WignerGrid { x_axis, p_axis, values })
}

/// Density-matrix path with a precomputed factorial table.
pub fn wigner_fock(rho: &DensityMatrix, grid: &GridSpec) -> Result<WignerGrid> {
    wigner(&FockWigner::new(rho), grid)
}

impl WignerGrid {
    fn step(axis: &[f64]) -> f64 {
        if axis.len() < 2 {
            1.0
        } else {
            (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
        }
    }

    pub fn cell_area(&self) -> f64 {
        Self::step(&self.x_axis) * Self::step(&self.p_axis)
    }

    /// Riemann sum of the grid values times the cell area.
    pub fn integral(&self) -> f64 {
        self.values.iter().flatten().sum::<f64>() * self.cell_area()
    }

    /// Location and value of the largest sample (first one on ties).
    pub fn peak(&self) -> (f64, f64, f64) {
        let mut best = (self.x_axis[0], self.p_axis[0], f64::NEG_INFINITY);
        for (i, row) in self.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > best.2 {
                    best = (self.x_axis[i], self.p_axis[j], v);
                }
            }
        }
        best
    }

    /// Integral over `p` for each `x`, i.e. the X-quadrature density.
    pub fn x_marginal(&self) -> Vec<f64> {
        let dp = Self::step(&self.p_axis);
        self.values.iter().map(|row| row.iter().sum::<f64>() * dp).collect()
    }

    /// CSV with a header row of p-values and a leading column of x-values.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["x\\p".to_string()];
        header.extend(self.p_axis.iter().map(|p| fmt_f64(*p)));
        w.write_record(&header)?;
        for (x, row) in self.x_axis.iter().zip(&self.values) {
            let mut rec = vec![fmt_f64(*x)];
            rec.extend(row.iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
