//! Small special-function helpers shared across modules.

/// `ln(n!)`, exact summation below 256 and Stirling series above.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 256 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        let x = n as f64 + 1.0;
        // Stirling series for ln Gamma(x)
        (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3))
            + 1.0 / (1260.0 * x.powi(5))
    }
}

/// Table of `ln(k!)` for `k < len`.
pub fn ln_factorial_table(len: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(len);
    let mut acc = 0.0;
    for k in 0..len {
        if k > 1 {
            acc += (k as f64).ln();
        }
        t.push(acc);
    }
    t
}

/// `ln C(n, k)` from a factorial table.
pub fn ln_binomial(table: &[f64], n: usize, k: usize) -> f64 {
    table[n] - table[k] - table[n - k]
}

/// Generalized Laguerre polynomials `L_j^{(k)}(x)` for `j = 0..count`.
pub fn laguerre_series(k: usize, x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let kf = k as f64;
    out.push(1.0);
    if count > 1 {
        out.push(1.0 + kf - x);
    }
    for j in 1..count.saturating_sub(1) {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + kf - x) * out[j] - (jf + kf) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// Normalized Hermite functions `psi_n(x) = (2^n n! sqrt(pi))^{-1/2} H_n(x) e^{-x^2/2}`
/// for `n = 0..count`, by the stable three-term recurrence.
pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp());
    if count > 1 {
        out.push(std::f64::consts::SQRT_2 * x * out[0]);
    }
    for n in 1..count.saturating_sub(1) {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                z
            } else {
                p1
            };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn factorials() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_relative_eq!(ln_factorial(5), 120f64.ln(), max_relative = 1e-14);
        // continuity between the summed and Stirling branches
        let summed: f64 = (2..=300u64).map(|k| (k as f64).ln()).sum();
        assert_relative_eq!(ln_factorial(300), summed, max_relative = 1e-13);
        let t = ln_factorial_table(10);
        assert_relative_eq!(t[9], ln_factorial(9), max_relative = 1e-14);
    }

    #[test]
    fn laguerre_low_orders() {
        let x = 0.7;
        let l = laguerre_series(2, x, 4);
        assert_relative_eq!(l[0], 1.0);
        assert_relative_eq!(l[1], 3.0 - x);
        // L_2^{(2)}(x) = (x^2 - 8x + 12) / 2
        assert_relative_eq!(l[2], (x * x - 8.0 * x + 12.0) / 2.0, max_relative = 1e-14);
        // L_3^{(2)}(x) = (-x^3 + 15x^2 - 60x + 60) / 6
        assert_relative_eq!(l[3], (-x * x * x + 15.0 * x * x - 60.0 * x + 60.0) / 6.0, max_relative = 1e-14);
    }

    #[test]
    fn hermite_functions_orthonormal() {
        let (t, w) = gauss_legendre(200);
        let mut gram = [[0.0; 6]; 6];
        for (ti, wi) in t.iter().zip(&w) {
            let x = 10.0 * ti;
            let psi = hermite_functions(x, 6);
            for m in 0..6 {
                for n in 0..6 {
                    gram[m][n] += 10.0 * wi * psi[m] * psi[n];
                }
            }
        }
        for (m, row) in gram.iter().enumerate() {
            for (n, g) in row.iter().enumerate() {
                let expect = if m == n { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-12, "{m} {n} {g}");
            }
        }
        assert_relative_eq!(hermite_functions(0.0, 1)[0], std::f64::consts::PI.powf(-0.25));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (t, w) = gauss_legendre(5);
        // exact through degree 9
        let integral: f64 = t.iter().zip(&w).map(|(x, wi)| wi * x.powi(8)).sum();
        assert_relative_eq!(integral, 2.0 / 9.0, epsilon = 1e-14);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }
}
