use super::config::ClonerConfig;
use crate::special::ln_factorial;
use crate::states::ComplexAmplitude;

/// `P(N >= m)` for `N ~ Poisson(mean)`.
///
/// Below the mode the upper tail is summed directly (no cancellation for tiny
/// tails); above it the complement of the lower sum is used. Terms are built in
/// log space so large means do not underflow `e^{-mean}`.
pub fn poisson_tail(mean: f64, m: u32) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if !(mean > 0.0) {
        return 0.0;
    }
    let ln_mean = mean.ln();
    if mean <= m as f64 {
        let mut term = (-mean + m as f64 * ln_mean - ln_factorial(m as u64)).exp();
        let mut sum = 0.0;
        let mut n = m as f64;
        while term > 0.0 && term > sum * 1e-17 {
            sum += term;
            n += 1.0;
            term *= mean / n;
        }
        sum.min(1.0)
    } else {
        let lower: f64 = (0..m).map(|n| (-mean + n as f64 * ln_mean - ln_factorial(n as u64)).exp()).sum();
        (1.0 - lower).clamp(0.0, 1.0)
    }
}

/// Herald probability of one coherent member `gamma`. Loss of a Poissonian
/// count is Poissonian, so the detected count is Poisson with mean
/// `eta R |gamma|^2 + dark`.
pub fn herald_weight(gamma: ComplexAmplitude, cfg: &ClonerConfig) -> f64 {
    poisson_tail(cfg.detected_mean(gamma), cfg.threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::DetectorModel;

    /// Brute-force tail: sum the pmf from m to 200.
    fn tail_oracle(mean: f64, m: u32) -> f64 {
        let mut pmf = (-mean).exp();
        let mut s = if m == 0 { pmf } else { 0.0 };
        for n in 1..=200u32 {
            pmf *= mean / n as f64;
            if n >= m {
                s += pmf;
            }
        }
        s
    }

    #[test]
    fn tail_examples() {
        assert_eq!(poisson_tail(3.7, 0), 1.0);
        assert_eq!(poisson_tail(0.0, 0), 1.0);
        assert_eq!(poisson_tail(0.0, 2), 0.0);
        assert!((poisson_tail(1.0, 1) - tail_oracle(1.0, 1)).abs() < 1e-15);
        assert!((poisson_tail(1.0, 1) - 0.632_120_558_828_557_7).abs() < 1e-15);
        assert!((poisson_tail(4.0, 3) - tail_oracle(4.0, 3)).abs() < 1e-14);
        assert!((poisson_tail(4.0, 3) - 0.761_896_694_446_455_7).abs() < 1e-12);
    }

    #[test]
    fn tail_matches_oracle_across_regimes() {
        for &mean in &[1e-6, 1e-3, 0.05, 0.3, 1.0, 2.5, 7.0, 20.0, 60.0] {
            for m in 0..12 {
                let a = poisson_tail(mean, m);
                let b = tail_oracle(mean, m);
                assert!((a - b).abs() <= 1e-13 + 1e-12 * b, "mean {mean} m {m}: {a} vs {b}");
                if b > 1e-300 && b < 0.5 {
                    assert!(((a - b) / b).abs() < 1e-10, "relative accuracy mean {mean} m {m}");
                }
            }
        }
    }

    #[test]
    fn large_mean_does_not_underflow() {
        assert!((poisson_tail(1000.0, 3) - 1.0).abs() < 1e-15);
        let t = poisson_tail(800.0, 800);
        assert!(t > 0.49 && t < 0.51, "{t}");
    }

    #[test]
    fn herald_weight_examples() {
        let cfg = ClonerConfig::experimental(1.0, 0.5, 0);
        assert_eq!(herald_weight(ComplexAmplitude::real(2.0), &cfg), 1.0);
        let cfg = cfg.with_threshold(1);
        let w = herald_weight(ComplexAmplitude::real(2.0), &cfg);
        assert!((w - (1.0 - (-0.4284f64).exp())).abs() < 1e-15);
        assert!((w - 0.3485).abs() < 1e-4);
        assert_eq!(herald_weight(ComplexAmplitude::ZERO, &cfg), 0.0);
        let dark = cfg.with_detector(DetectorModel {
            efficiency: 0.63,
            dark_mean: 0.1,
        });
        assert!((herald_weight(ComplexAmplitude::ZERO, &dark) - (1.0 - (-0.1f64).exp())).abs() < 1e-15);
    }
}
