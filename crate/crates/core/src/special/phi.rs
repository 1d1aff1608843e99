//! `phi1(z) = (e^z - 1) / z` and the finite-time Laplace integral built on it.

use num_complex::Complex64;

use super::contour::divided_difference;

/// `(e^z - 1) / z`, entire, accurate for all `z` with `Re z` below overflow.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1.0 {
        // \sum z^m / (m + 1)!
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for m in 1..24 {
            term *= z / (m as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

/// Divided difference `(phi1(z1) - phi1(z2)) / (z1 - z2)`.
pub fn phi1_dd(z1: Complex64, z2: Complex64) -> Complex64 {
    let mid = 0.5 * (z1 + z2);
    let radius = (0.25 * mid.norm()).max(1.0);
    divided_difference(phi1, z1, z2, radius, 0.5)
}

/// `E(k; t) = \int_0^t e^{-k s} ds = t phi1(-k t)`.
pub fn laplace_window(k: Complex64, t: f64) -> Complex64 {
    t * phi1(-k * t)
}

/// `(E(k1) - E(k2)) / (k1 - k2)`, finite for coincident arguments.
pub fn laplace_window_dd(k1: Complex64, k2: Complex64, t: f64) -> Complex64 {
    -t * t * phi1_dd(-k1 * t, -k2 * t)
}

/// `(e^{-a t} - e^{-c t}) / (c - a)`, evaluated from the slower exponential.
pub fn exp_dd(a: Complex64, c: Complex64, t: f64) -> Complex64 {
    if a.re <= c.re {
        t * (-a * t).exp() * phi1(-(c - a) * t)
    } else {
        t * (-c * t).exp() * phi1(-(a - c) * t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phi1_small_and_large() {
        assert_eq!(phi1(c(0.0, 0.0)), c(1.0, 0.0));
        let z = c(1e-9, 0.0);
        assert!((phi1(z).re - (1.0 + 0.5e-9)).abs() < 1e-16);
        let z = c(-3.0, 2.0);
        assert!((phi1(z) - (z.exp() - 1.0) / z).norm() < 1e-15);
        // continuity across the series switch
        let (a, b) = (phi1(c(0.999_999_9, 0.0)), phi1(c(1.000_000_1, 0.0)));
        assert!((a - b).norm() < 1e-6);
    }

    #[test]
    fn window_matches_definition() {
        let k = c(0.7, -0.3);
        let t = 2.5;
        let e = laplace_window(k, t);
        assert!((e - (1.0 - (-k * t).exp()) / k).norm() < 1e-15);
        assert!((laplace_window(c(0.0, 0.0), t).re - t).abs() < 1e-15);
    }

    #[test]
    fn window_dd_confluent_limit() {
        // dE/dk = -\int s e^{-ks} ds = (t e^{-kt} - E) / k
        let (k, t) = (c(1.3, 0.0), 0.8);
        let exact = (t * (-k * t).exp() - laplace_window(k, t)) / k;
        assert!((laplace_window_dd(k, k, t) - exact).norm() < 1e-15);
        let k2 = k + 1e-7;
        let fd = (laplace_window(k2, t) - laplace_window(k, t)) / 1e-7;
        assert!((laplace_window_dd(k, k2, t) - fd).norm() < 1e-8);
    }

    #[test]
    fn exp_dd_no_overflow() {
        let v = exp_dd(c(900.0, 0.0), c(1.0, 0.0), 1.0);
        assert!((v.re - (-1.0f64).exp() / 899.0).abs() < 1e-17);
        let w = exp_dd(c(1.0, 0.0), c(900.0, 0.0), 1.0);
        assert_eq!(v, w);
    }
}
