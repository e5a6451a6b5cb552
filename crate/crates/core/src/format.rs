//! Number formatting for CSV output.

/// Shortest representation that parses back to the same `f64`, switching
/// to exponent notation for very small or very large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for v in [
            0.0,
            -0.0,
            1.0,
            0.1,
            1e-5,
            -6.8e-18,
            123456.789,
            2.5e17,
            f64::MIN_POSITIVE,
            f64::NAN,
            f64::INFINITY,
        ] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert!(back == v || (v.is_nan() && back.is_nan()), "{v} -> {s}");
        }
        assert_eq!(fmt_f64(6.830473686658678e-18), "6.830473686658678e-18");
        assert_eq!(fmt_f64(0.25), "0.25");
    }
}
