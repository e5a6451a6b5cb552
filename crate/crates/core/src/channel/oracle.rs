//! Brute-force Fock-space model of the cloner, independent of the coherent
//! ensemble path: displacement by explicit matrix elements, beamsplitters as
//! two-mode Fock maps, a binomial-loss POVM on the tap mode, partial traces.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::config::ClonerConfig;
use crate::error::{invalid, ClonerError, Result};
use crate::special::{ln_binomial, ln_factorial_table};
use crate::states::{coherent_fock, default_dim, displacement_matrix, CMatrix, CVector, ComplexAmplitude, DensityMatrix};

/// Largest accepted norm loss from truncating the clone modes.
pub const ORACLE_DEFICIT_LIMIT: f64 = 1e-6;
/// Largest per-mode dimension for which the two-clone joint state is built.
pub const JOINT_DIM_LIMIT: usize = 15;

#[derive(Debug, Clone)]
pub struct FockOracleOutput {
    /// Reduced state of clone 1.
    pub clone: DensityMatrix,
    /// Joint state of clones 1 and 2 on `dim^2` levels, index `i * dim + l`.
    pub joint: Option<DensityMatrix>,
    pub success_probability: f64,
    /// Worst unheralded norm loss across ring members.
    pub truncation_deficit: f64,
}

/// Beamsplitter acting on `|psi> (x) |0>`: photon `n` goes to
/// `sum_k sqrt(C(n,k)) t^{n-k} r^k |n-k>|k>`. Returns `out[k][n-k]`.
fn split_with_vacuum(psi: &CVector, t: f64, r: f64, lnf: &[f64]) -> Vec<CVector> {
    let w = psi.len();
    let mut out = vec![CVector::zeros(w); w];
    for n in 0..w {
        let amp = psi[n];
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        for (k, slot) in out.iter_mut().enumerate().take(n + 1) {
            let c = (0.5 * ln_binomial(lnf, n, k)).exp() * pow0(t, n - k) * pow0(r, k);
            slot[n - k] += amp * c;
        }
    }
    out
}

fn pow0(x: f64, n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        x.powi(n as i32)
    }
}

/// `P(Binomial(k, eta) + Poisson(dark) >= m)` for `k = 0..len`, by direct pmf sums.
fn click_probabilities(len: usize, eta: f64, dark: f64, m: u32, lnf: &[f64]) -> Vec<f64> {
    let m = m as usize;
    let dark_pmf: Vec<f64> = (0..m.max(1))
        .map(|n| {
            if dark == 0.0 {
                if n == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (-dark + n as f64 * dark.ln() - lnf[n.min(lnf.len() - 1)]).exp()
            }
        })
        .collect();
    // P(dark >= j) for j = 0..=m
    let dark_tail = |j: usize| -> f64 { 1.0 - dark_pmf.iter().take(j).sum::<f64>() };
    (0..len)
        .map(|k| {
            (0..=k)
                .map(|c| {
                    let binom = (ln_binomial(lnf, k, c)).exp() * pow0(eta, c) * pow0(1.0 - eta, k - c);
                    binom * if c >= m { 1.0 } else { dark_tail(m - c) }
                })
                .sum()
        })
        .collect()
}

/// Runs the cloner in truncated Fock space with `dim` levels per clone mode.
/// The joint two-clone state is built when `with_joint` is true (requires two
/// clones and `dim <= JOINT_DIM_LIMIT`).
pub fn fock_oracle_cloner(cfg: &ClonerConfig, dim: usize, with_joint: bool) -> Result<FockOracleOutput> {
    cfg.validate()?;
    if dim < 2 {
        return Err(invalid("oracle needs at least two Fock levels"));
    }
    if with_joint && (cfg.n_clones != 2 || dim > JOINT_DIM_LIMIT) {
        return Err(invalid(format!(
            "joint clone state needs n_clones = 2 and dim <= {JOINT_DIM_LIMIT} (got {} clones, dim {dim})",
            cfg.n_clones
        )));
    }
    let radius = cfg.x * cfg.alpha.norm();
    let outer = cfg.alpha.norm() + radius;
    let work = default_dim(outer * outer).max(dim) + 10;
    let lnf = ln_factorial_table(2 * work + 2);

    let (input, _) = coherent_fock(cfg.alpha, work)?;
    let tap_t = (1.0 - cfg.tap_reflectivity).sqrt();
    let tap_r = cfg.tap_reflectivity.sqrt();
    let clone_t = (1.0 / cfg.n_clones as f64).sqrt();
    let clone_r = (1.0 - 1.0 / cfg.n_clones as f64).sqrt();
    let clicks = click_probabilities(work, cfg.detector.efficiency, cfg.detector.dark_mean, cfg.threshold, &lnf);

    let jd = dim * dim;
    let mut clone = CMatrix::zeros(dim, dim);
    let mut joint = with_joint.then(|| CMatrix::zeros(jd, jd));
    let mut success = 0.0;
    let mut worst_deficit = 0.0f64;
    let weight = 1.0 / cfg.ring_points as f64;
    let one = Complex64::new(1.0, 0.0);

    for j in 0..cfg.ring_points {
        let beta = ComplexAmplitude::from_polar(radius, TAU * j as f64 / cfg.ring_points as f64);
        let displaced = displacement_matrix(beta, work)? * &input;
        let tap_components = split_with_vacuum(&displaced, tap_t, tap_r, &lnf);
        let mut retained = 0.0;
        for (k, signal) in tap_components.iter().enumerate() {
            let norm2 = signal.norm_squared();
            if norm2 == 0.0 {
                continue;
            }
            let head = signal.rows(0, dim).into_owned();
            retained += head.norm_squared();
            let h = clicks[k];
            if h == 0.0 {
                continue;
            }
            success += weight * h * norm2;
            // split the heralded signal into clone 1 (mode i) and the rest (mode l)
            let mut amp = CMatrix::zeros(dim, dim);
            for n in 0..dim {
                if head[n].norm_sqr() == 0.0 {
                    continue;
                }
                for i in 0..=n {
                    let l = n - i;
                    let c = (0.5 * ln_binomial(&lnf, n, i)).exp() * pow0(clone_t, i) * pow0(clone_r, l);
                    amp[(i, l)] = head[n] * c;
                }
            }
            let scale = Complex64::new(weight * h, 0.0);
            clone.gemm(scale, &amp, &amp.adjoint(), one);
            if let Some(joint) = joint.as_mut() {
                let v = CVector::from_iterator(jd, (0..dim).flat_map(|i| (0..dim).map(move |l| (i, l))).map(|(i, l)| amp[(i, l)]));
                joint.gerc(scale, &v, &v, one);
            }
        }
        worst_deficit = worst_deficit.max(1.0 - retained);
    }
    if worst_deficit > ORACLE_DEFICIT_LIMIT {
        return Err(ClonerError::Truncation {
            dim,
            deficit: worst_deficit,
            limit: ORACLE_DEFICIT_LIMIT,
        });
    }
    if !(success > 0.0) {
        return Err(ClonerError::Unheraldable);
    }
    Ok(FockOracleOutput {
        clone: DensityMatrix::from_raw_normalized(clone)?,
        joint: joint.map(DensityMatrix::from_raw_normalized).transpose()?,
        success_probability: success.min(1.0),
        truncation_deficit: worst_deficit.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_cloner, DetectorModel};
    use crate::states::ensemble_to_density;

    #[test]
    fn undisplaced_unheralded_clone_is_coherent() {
        let cfg = ClonerConfig::new(ComplexAmplitude::real(0.6), 0.0, 0).with_tap(0.17);
        let out = fock_oracle_cloner(&cfg, 12, false).unwrap();
        let target = ComplexAmplitude::real(0.6 * (0.83f64 / 2.0).sqrt());
        let f = out.clone.fidelity_with_coherent(target).unwrap();
        assert!((f - 1.0).abs() < 1e-8, "{f}");
        assert!((out.success_probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn success_matches_ensemble_path() {
        let cfg = ClonerConfig::experimental(0.8, 0.5, 2);
        let oracle = fock_oracle_cloner(&cfg, 20, false).unwrap();
        let exact = apply_cloner(&cfg).unwrap();
        let s = exact.success_probability.unwrap();
        assert!(
            (oracle.success_probability - s).abs() < 1e-6,
            "{} vs {s}",
            oracle.success_probability
        );
    }

    #[test]
    fn joint_state_is_physical() {
        let cfg = ClonerConfig::experimental(0.7, 0.4, 0);
        let out = fock_oracle_cloner(&cfg, 10, true).unwrap();
        let joint = out.joint.unwrap();
        assert_eq!(joint.dim(), 100);
        joint.validate().unwrap();
        out.clone.validate().unwrap();
    }

    #[test]
    fn dark_counts_agree_with_ensemble_path() {
        let cfg = ClonerConfig::experimental(0.6, 0.5, 2).with_detector(DetectorModel {
            efficiency: 0.63,
            dark_mean: 0.2,
        });
        let oracle = fock_oracle_cloner(&cfg, 16, false).unwrap();
        let exact = apply_cloner(&cfg).unwrap();
        assert!((oracle.success_probability - exact.success_probability.unwrap()).abs() < 1e-9);
        let truth = ensemble_to_density(&exact.clone_ensemble(), 16).unwrap();
        let diff = (oracle.clone.matrix() - truth.matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn click_probabilities_without_dark_are_binomial_tails() {
        let lnf = ln_factorial_table(10);
        let p = click_probabilities(4, 0.5, 0.0, 2, &lnf);
        assert_eq!(p[0], 0.0);
        assert_eq!(p[1], 0.0);
        assert!((p[2] - 0.25).abs() < 1e-15);
        assert!((p[3] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_requests() {
        let cfg = ClonerConfig::experimental(0.8, 0.5, 1);
        assert!(fock_oracle_cloner(&cfg, 20, true).is_err());
        assert!(fock_oracle_cloner(&cfg.with_clones(3), 10, true).is_err());
        let big = ClonerConfig::experimental(3.0, 0.5, 0);
        assert!(matches!(fock_oracle_cloner(&big, 6, false), Err(ClonerError::Truncation { .. })));
    }

    #[test]
    fn three_clones_reduce_correctly() {
        let cfg = ClonerConfig::experimental(0.9, 0.3, 1).with_clones(3);
        let oracle = fock_oracle_cloner(&cfg, 14, false).unwrap();
        let exact = apply_cloner(&cfg).unwrap();
        let f_exact = exact.clone_ensemble().fidelity_with_coherent(cfg.alpha);
        let f_oracle = oracle.clone.fidelity_with_coherent(cfg.alpha).unwrap();
        assert!((f_exact - f_oracle).abs() < 1e-7);
    }
}
