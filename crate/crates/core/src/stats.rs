//! Special functions behind the F-test: log-gamma, the regularized
//! incomplete beta function and F-distribution tail probabilities/quantiles.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for I_x(a, b), modified Lentz.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a) / b
    }
}

/// Upper tail P(F(d1, d2) > v).
pub fn f_sf(v: f64, d1: f64, d2: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    if !v.is_finite() {
        return 0.0;
    }
    // I_{d2/(d2 + d1 v)}(d2/2, d1/2), written to avoid cancellation for large v
    let z = d2 / (d2 + d1 * v);
    inc_beta(z, d2 / 2.0, d1 / 2.0)
}

pub fn f_cdf(v: f64, d1: f64, d2: f64) -> f64 {
    1.0 - f_sf(v, d1, d2)
}

/// Critical value `v` with `P(F(d1, d2) > v) = alpha`.
pub fn f_critical(d1: usize, d2: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "significance level {alpha} outside (0, 1)"
        )));
    }
    if d1 == 0 || d2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "degrees of freedom must be positive (got {d1}, {d2})"
        )));
    }
    let (a, b) = (d2 as f64 / 2.0, d1 as f64 / 2.0);
    // I_z(a, b) is increasing in z; solve I_z = alpha by bisection, then map
    // z back to v = d2 (1 - z) / (d1 z).
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if inc_beta(mid, a, b) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    Ok(d2 as f64 * (1.0 - z) / (d1 as f64 * z))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(100.0) - 359.134_205_369_575_4).abs() < 1e-10);
    }

    #[test]
    fn inc_beta_closed_forms() {
        // I_x(1, b) = 1 - (1 - x)^b
        for &x in &[0.1, 0.5, 0.9] {
            assert!((inc_beta(x, 1.0, 3.0) - (1.0 - (1.0 - x).powi(3))).abs() < 1e-14);
            assert!((inc_beta(x, 2.0, 1.0) - x * x).abs() < 1e-14);
        }
        assert_eq!(inc_beta(0.0, 2.0, 3.0), 0.0);
        assert_eq!(inc_beta(1.0, 2.0, 3.0), 1.0);
    }

    #[test]
    fn f22_quantile_is_closed_form() {
        // P(F(2,2) > v) = 1 / (1 + v)
        let v = f_critical(2, 2, 0.05).unwrap();
        assert!((v - 19.0).abs() < 1e-9, "{v}");
        assert!((f_sf(3.0, 2.0, 2.0) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn tail_mass_ordering() {
        for &(d1, d2) in &[(1, 10), (2, 50), (26, 5), (4, 100)] {
            let strict = f_critical(d1, d2, 0.01).unwrap();
            let loose = f_critical(d1, d2, 0.05).unwrap();
            assert!(strict > loose);
            assert!((f_sf(loose, d1 as f64, d2 as f64) - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(f_critical(1, 10, 0.0).is_err());
        assert!(f_critical(1, 10, 1.0).is_err());
        assert!(f_critical(0, 10, 0.05).is_err());
    }
}
