//! Gauss hypergeometric series `2F1(A, B; C; x)` for complex parameters and
//! real `x` in `[0, 1)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::sum::ComplexSum;
use crate::error::{Error, Result};

/// Largest argument accepted; closer to 1 the series is too slow to be useful.
pub const X_MAX: f64 = 0.99;

/// Term budget before giving up.
pub const MAX_TERMS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyp2F1Args {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub x: f64,
}

impl Hyp2F1Args {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, x: f64) -> Self {
        Self { a, b, c, x }
    }

    pub fn real(a: f64, b: f64, c: f64, x: f64) -> Self {
        Self::new(a.into(), b.into(), c.into(), x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyp2F1Value {
    pub value: Complex64,
    /// Number of series terms summed.
    pub terms: usize,
    /// Rigorous bound on the dropped remainder.
    pub tail_bound: f64,
}

fn is_nonpositive_integer(c: Complex64) -> bool {
    c.im == 0.0 && c.re <= 0.0 && c.re.fract() == 0.0
}

/// Sums `\sum_n (A)_n (B)_n / (C)_n x^n / n!` until the certified remainder
/// is below `tol`.
///
/// The remainder after term `n` is bounded by `|t_n| rho / (1 - rho)` where
/// `rho >= |t_{m+1} / t_m|` for every `m >= n`, obtained from
/// `|A + m| <= m + |A|` and `|C + m| >= m - |C|`.
pub fn hyp2f1(args: Hyp2F1Args, tol: f64) -> Result<Hyp2F1Value> {
    let Hyp2F1Args { a, b, c, x } = args;
    if is_nonpositive_integer(c) {
        return Err(Error::InvalidC { re: c.re, im: c.im });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if !(0.0..1.0).contains(&x) {
        return Err(Error::InvalidInput(format!("2F1 argument must lie in [0, 1), got {x}")));
    }
    if x > X_MAX {
        return Err(Error::NoConvergence(format!(
            "2F1 series refused for x = {x} > {X_MAX}; use the direct Matsubara sum"
        )));
    }
    if x == 0.0 {
        return Ok(Hyp2F1Value {
            value: Complex64::new(1.0, 0.0),
            terms: 1,
            tail_bound: 0.0,
        });
    }

    let (abs_a, abs_b, abs_c) = (a.norm(), b.norm(), c.norm());
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = ComplexSum::new();
    sum.add(term);
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * x;
        sum.add(term);
        if term == Complex64::new(0.0, 0.0) {
            // (A)_n or (B)_n hit zero: the series terminates.
            return Ok(Hyp2F1Value {
                value: sum.value(),
                terms: n + 2,
                tail_bound: 0.0,
            });
        }
        // bound on every later ratio, valid once m - |C| > 0
        let m = nf + 1.0;
        if m > abs_c {
            let ra = ((m + abs_a) / (m + 1.0)).max(1.0);
            let rb = (m + abs_b) / (m - abs_c);
            let rho = x * ra * rb;
            if rho < 1.0 {
                let tail = term.norm() * rho / (1.0 - rho);
                if tail <= tol {
                    return Ok(Hyp2F1Value {
                        value: sum.value(),
                        terms: n + 2,
                        tail_bound: tail,
                    });
                }
            }
        }
    }
    Err(Error::NoConvergence(format!(
        "2F1 series exhausted {MAX_TERMS} terms at x = {x}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn geometric_identity() {
        let v = hyp2f1(Hyp2F1Args::real(1.0, 2.0, 2.0, 0.5), 1e-15).unwrap();
        assert!((v.value.re - 2.0).abs() < 1e-14);
        assert!(v.value.im.abs() < 1e-16);
        assert!(v.tail_bound <= 1e-15);
    }

    #[test]
    fn zero_argument_is_one() {
        let args = Hyp2F1Args::new(
            Complex64::new(0.3, -2.0),
            Complex64::new(7.0, 1.0),
            Complex64::new(-0.5, 0.2),
            0.0,
        );
        assert_eq!(hyp2f1(args, 1e-12).unwrap().value, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn complex_parameters_match_extended_precision_series() {
        // 200-term Pochhammer sum at 40 significant digits
        let expected = Complex64::new(1.236_466_074_223_319_7, 0.032_979_898_327_730_113);
        let args = Hyp2F1Args::new(
            1.0.into(),
            Complex64::new(1.5, 0.5),
            Complex64::new(2.5, 0.5),
            0.3,
        );
        let v = hyp2f1(args, 1e-16).unwrap();
        assert!((v.value - expected).norm() < 1e-15, "{:?}", v.value);
    }

    #[test]
    fn log_identity() {
        // 2F1(1, 1; 2; x) = -ln(1 - x) / x
        let x = 0.9;
        let v = hyp2f1(Hyp2F1Args::real(1.0, 1.0, 2.0, x), 1e-14).unwrap();
        assert!((v.value.re + (1.0 - x as f64).ln() / x).abs() < 1e-13);
    }

    #[test]
    fn terminating_series() {
        // 2F1(-2, b; c; x) is a polynomial of degree 2
        let (b, c, x) = (3.0, 4.0, 0.5);
        let v = hyp2f1(Hyp2F1Args::real(-2.0, b, c, x), 1e-15).unwrap();
        let exact = 1.0 - 2.0 * b / c * x + b * (b + 1.0) / (c * (c + 1.0)) * x * x;
        assert!((v.value.re - exact).abs() < 1e-15);
        assert_eq!(v.tail_bound, 0.0);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            hyp2f1(Hyp2F1Args::real(1.0, 1.0, -3.0, 0.5), 1e-10),
            Err(Error::InvalidC { .. })
        ));
        assert!(matches!(
            hyp2f1(Hyp2F1Args::real(1.0, 1.0, 2.0, 0.995), 1e-10),
            Err(Error::NoConvergence(_))
        ));
        assert!(hyp2f1(Hyp2F1Args::real(1.0, 1.0, 2.0, 1.0), 1e-10).is_err());
        assert!(hyp2f1(Hyp2F1Args::real(1.0, 1.0, 2.0, -0.1), 1e-10).is_err());
    }

    proptest! {
        #[test]
        fn contiguity_sanity(bre in 0.1f64..5.0, bim in -3.0f64..3.0, x in 0.0f64..0.9) {
            let b = Complex64::new(bre, bim);
            let v = hyp2f1(Hyp2F1Args::new(1.0.into(), b, b, x), 1e-14).unwrap();
            prop_assert!((v.value * (1.0 - x) - 1.0).norm() < 1e-12);
        }
    }
}
