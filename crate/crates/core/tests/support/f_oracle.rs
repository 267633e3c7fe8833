//! F-distribution upper quantiles by direct numerical integration of the
//! density, independent of any incomplete-beta code.

use statrs::function::gamma::ln_gamma;

fn ln_density(x: f64, d1: f64, d2: f64) -> f64 {
    let ln_beta = ln_gamma(d1 / 2.0) + ln_gamma(d2 / 2.0) - ln_gamma((d1 + d2) / 2.0);
    (d1 / 2.0) * (d1 / d2).ln() + (d1 / 2.0 - 1.0) * x.ln()
        - ((d1 + d2) / 2.0) * (1.0 + d1 * x / d2).ln()
        - ln_beta
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// P(F(d1, d2) > v), integrating over x = v + u / (1 - u), u in [0, 1).
pub fn upper_tail(v: f64, d1: f64, d2: f64) -> f64 {
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let x = v + u / (1.0 - u);
        (ln_density(x, d1, d2)).exp() / ((1.0 - u) * (1.0 - u))
    };
    // split so each piece is smooth enough for the adaptive rule
    let knots = [0.0, 0.25, 0.5, 0.75, 0.9, 0.97, 0.995, 1.0];
    knots
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let (fa, fm, fb) = (g(a), g(0.5 * (a + b)), g(b));
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(&g, a, b, fa, fm, fb, whole, 1e-14, 40)
        })
        .sum()
}

/// Value v with P(F(d1, d2) > v) = alpha, by bisection on the tail.
pub fn critical_value(d1: f64, d2: f64, alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while upper_tail(hi, d1, d2) > alpha {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if upper_tail(mid, d1, d2) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}
