//! Matsubara-series objects of the Ohmic quantum bath.
//!
//! * the initial correlation `<xi(t) q(0)>` as a direct series and through
//!   `2F1`;
//! * the exponential-mode decomposition of the stationary noise kernel
//!   `-(gamma M / 2 beta) nu / sinh^2(nu tau / 2)`.

use std::cell::RefCell;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::contour::divided_difference;
use super::hyp2f1::{hyp2f1, Hyp2F1Args};
use super::sum::CompensatedSum;
use crate::error::{Error, Result};
use crate::model::PhysicalParams;

/// Matsubara summation value with its certified remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    pub tail_bound: f64,
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be positive and finite, got {t}")));
    }
    Ok(())
}

/// `-(2 gamma / beta) \sum_{n=1}^{N} nu_n e^{-nu_n t} / ((nu_n + l1)(nu_n + l2))`.
///
/// The denominator is evaluated as the real quadratic `nu_n^2 + gamma nu_n + w0^2/M`,
/// so conjugate roots cancel exactly. Each term is bounded by
/// `e^{-nu_n t} / nu_n`, which gives the geometric tail bound used for the
/// stopping rule.
pub fn xi_q0_sum(p: &PhysicalParams, t: f64, n_max: usize, tol: f64) -> Result<SeriesValue> {
    let nu = p.matsubara()?;
    check_time(t)?;
    let pref = 2.0 * p.gamma / p.beta;
    let rate = p.rate();
    let one_minus_x = -(-nu * t).exp_m1();

    let tail_after = |n: usize| -> f64 {
        let next = (n + 1) as f64;
        pref * (-next * nu * t).exp() / (next * nu * one_minus_x)
    };

    let mut sum = CompensatedSum::new();
    for n in 1..=n_max {
        let nu_n = n as f64 * nu;
        let decay = (-nu_n * t).exp();
        sum.add(nu_n * decay / (nu_n * nu_n + p.gamma * nu_n + rate));
        let tail = tail_after(n);
        if tail <= tol || decay == 0.0 {
            return Ok(SeriesValue {
                value: -pref * sum.value(),
                terms: n,
                tail_bound: tail,
            });
        }
    }
    Err(Error::TailNotBounded { tol, n_max })
}

/// Closed form of the initial correlation in terms of `2F1(1; a_j; b_j; e^{-nu t})`
/// with `a_j = (l_j + nu) / nu` and `b_j = 2 + l_j / nu`.
///
/// Written as `-(2 gamma / beta) e^{-nu t} g[l1, l2]` with
/// `g(l) = l 2F1(...) / (l + nu)`; the divided difference degenerates
/// gracefully into `g'(l)` for equal roots.
pub fn xi_q0_closed(p: &PhysicalParams, t: f64, tol: f64) -> Result<f64> {
    let nu = p.matsubara()?;
    check_time(t)?;
    let x = (-nu * t).exp();
    if x == 0.0 || p.gamma == 0.0 {
        return Ok(0.0);
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let g = |l: Complex64| -> Complex64 {
        let a = (l + nu) / nu;
        let b = 2.0 + l / nu;
        match hyp2f1(Hyp2F1Args::new(1.0.into(), a, b, x), tol * 1e-3) {
            Ok(v) => l * v.value / (l + nu),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                Complex64::new(f64::NAN, 0.0)
            }
        }
    };
    // poles of g sit at l = -nu (1 + m); keep the contour well inside.
    let centre = 0.5 * (p.lambda1 + p.lambda2).re;
    let radius = 0.25 * (nu + centre);
    let dd = divided_difference(g, p.lambda1, p.lambda2, radius, 0.05);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(-2.0 * p.gamma / p.beta * x * dd.re)
}

/// Correlation with automatic fallback to the direct sum where the `2F1`
/// series is refused (`nu t` below about 0.01).
pub fn xi_q0(p: &PhysicalParams, t: f64, tol: f64) -> Result<f64> {
    match xi_q0_closed(p, t, tol) {
        Err(Error::NoConvergence(_)) => {
            xi_q0_sum(p, t, 100_000_000, tol).map(|v| v.value)
        }
        other => other,
    }
}

/// Direct evaluation of the real stationary kernel for `tau != 0`.
pub fn noise_kernel_direct(p: &PhysicalParams, tau: f64) -> Result<f64> {
    let nu = p.matsubara()?;
    let s = (0.5 * nu * tau).sinh();
    Ok(-(p.gamma * p.mass / (2.0 * p.beta)) * nu / (s * s))
}

/// Truncated exponential-mode expansion of the stationary kernel,
/// `-(2 gamma M nu / beta) \sum_n n e^{-n nu tau}`, valid for `tau >= t_min`.
///
/// Every mode `w_n e^{-nu_n |tau|}` is paired with the contact term
/// `-(2 w_n / nu_n) delta(tau)` that cancels its integral; the pair is what
/// the coefficient module integrates against the susceptibilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeExpansion {
    pub prefactors: Vec<f64>,
    pub rates: Vec<f64>,
    pub n_max: usize,
    pub t_min: f64,
    /// Upper bound on the dropped modes for every `tau >= t_min`.
    pub tail_bound: f64,
    /// Weight of the white (Markovian) part, `2 gamma M / beta`.
    pub white_weight: f64,
}

impl ModeExpansion {
    pub fn evaluate(&self, tau: f64) -> Result<f64> {
        if tau < self.t_min {
            return Err(Error::InvalidInput(format!(
                "mode expansion valid only for tau >= {}, got {tau}",
                self.t_min
            )));
        }
        let mut sum = CompensatedSum::new();
        for (w, r) in self.prefactors.iter().zip(&self.rates) {
            sum.add(w * (-r * tau).exp());
        }
        Ok(sum.value())
    }

    /// Contact weight attached to mode `n` (1-based).
    pub fn counterterm(&self, n: usize) -> f64 {
        -2.0 * self.prefactors[n - 1] / self.rates[n - 1]
    }
}

fn kernel_tail(amplitude: f64, x: f64, n: usize) -> f64 {
    // \sum_{m > n} m x^m = x^{n+1} ((n+1) - n x) / (1 - x)^2
    let nf = n as f64;
    let one_minus_x = 1.0 - x;
    amplitude * x.powf(nf + 1.0) * ((nf + 1.0) - nf * x) / (one_minus_x * one_minus_x)
}

pub fn noise_kernel_modes(p: &PhysicalParams, n_max: usize, t_min: f64) -> Result<ModeExpansion> {
    let nu = p.matsubara()?;
    check_time(t_min)?;
    let amplitude = 2.0 * p.gamma * p.mass * nu / p.beta;
    let prefactors = (1..=n_max).map(|n| -amplitude * n as f64).collect();
    let rates = (1..=n_max).map(|n| n as f64 * nu).collect();
    let x = (-nu * t_min).exp();
    Ok(ModeExpansion {
        prefactors,
        rates,
        n_max,
        t_min,
        tail_bound: kernel_tail(amplitude, x, n_max),
        white_weight: 2.0 * p.gamma * p.mass / p.beta,
    })
}

/// Smallest expansion whose certified tail on `tau >= t_min` is below `tol`.
pub fn noise_kernel_modes_for_tolerance(p: &PhysicalParams, t_min: f64, tol: f64) -> Result<ModeExpansion> {
    let nu = p.matsubara()?;
    check_time(t_min)?;
    let amplitude = 2.0 * p.gamma * p.mass * nu / p.beta;
    let x = (-nu * t_min).exp();
    const CAP: usize = 10_000_000;
    let mut n = 1;
    while kernel_tail(amplitude, x, n) > tol {
        n *= 2;
        if n > CAP {
            return Err(Error::TailNotBounded { tol, n_max: CAP });
        }
    }
    // bisect down to the smallest sufficient order
    let (mut lo, mut hi) = (n / 2, n);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if kernel_tail(amplitude, x, mid) > tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    noise_kernel_modes(p, hi.max(1), t_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn overdamped(hbar: f64) -> PhysicalParams {
        PhysicalParams::reduced(1.0, 1.0, 0.16, 1.0, hbar).unwrap()
    }

    /// Plain summation of the defining series with complex roots.
    fn brute_force(p: &PhysicalParams, t: f64, n: usize) -> f64 {
        let nu = p.nu.unwrap();
        let mut s = Complex64::new(0.0, 0.0);
        for k in (1..=n).rev() {
            let nk = k as f64 * nu;
            s += nk * (-nk * t).exp() / ((nk + p.lambda1) * (nk + p.lambda2));
        }
        -2.0 * p.gamma / p.beta * s.re
    }

    #[test]
    fn sum_matches_million_term_oracle() {
        // hbar beta = 1, nu t = 1
        let p = overdamped(1.0);
        let t = 1.0 / p.nu.unwrap();
        let v = xi_q0_sum(&p, t, 1_000_000, 1e-16).unwrap();
        let oracle = brute_force(&p, t, 1_000_000);
        assert!(v.value < 0.0);
        assert!((v.value - oracle).abs() <= 1e-14 * oracle.abs(), "{} vs {oracle}", v.value);
    }

    #[test]
    fn vanishes_at_long_times() {
        let p = overdamped(1.0);
        let t = 50.0 / p.nu.unwrap();
        let s = xi_q0_sum(&p, t, 1000, 1e-30).unwrap();
        assert!(s.value.abs() < 1e-20);
        assert!(xi_q0_closed(&p, t, 1e-30).unwrap().abs() < 1e-20);
    }

    #[test]
    fn underdamped_sum_is_real() {
        let p = PhysicalParams::reduced(1.0, 0.5, 1.0, 1.0, 1.0).unwrap();
        let t = 0.3 / p.nu.unwrap();
        let v = xi_q0_sum(&p, t, 100_000, 1e-15).unwrap();
        let oracle = brute_force(&p, t, 200_000);
        assert!((v.value - oracle).abs() < 1e-14);
    }

    #[test]
    fn sum_reports_unreachable_tolerance() {
        let p = overdamped(1.0);
        let t = 1e-4 / p.nu.unwrap();
        assert!(matches!(
            xi_q0_sum(&p, t, 100, 1e-12),
            Err(Error::TailNotBounded { .. })
        ));
    }

    #[test]
    fn classical_params_are_rejected() {
        let p = overdamped(0.0);
        assert_eq!(xi_q0_sum(&p, 1.0, 10, 1e-10).unwrap_err(), Error::HbarZero);
        assert_eq!(xi_q0_closed(&p, 1.0, 1e-10).unwrap_err(), Error::HbarZero);
        assert_eq!(noise_kernel_modes(&p, 10, 1.0).unwrap_err(), Error::HbarZero);
    }

    #[test]
    fn closed_form_equals_sum_in_all_regimes() {
        for p in [
            overdamped(1.0),
            PhysicalParams::reduced(1.0, 2.0, 1.0, 1.0, 1.0).unwrap(),
            PhysicalParams::reduced(1.0, 0.5, 1.0, 1.0, 1.0).unwrap(),
        ] {
            let nu = p.nu.unwrap();
            for &nt in &[0.1, 0.5, 2.0, 10.0] {
                let t = nt / nu;
                let s = xi_q0_sum(&p, t, 10_000_000, 1e-18).unwrap().value;
                let c = xi_q0_closed(&p, t, 1e-18).unwrap();
                assert!((s - c).abs() <= 1e-10 * s.abs(), "{:?} nt={nt}: {s} vs {c}", p.regime);
            }
        }
    }

    #[test]
    fn closed_form_refuses_near_one() {
        let p = overdamped(1.0);
        let t = 0.005 / p.nu.unwrap();
        assert!(matches!(xi_q0_closed(&p, t, 1e-12), Err(Error::NoConvergence(_))));
        // the fallback still delivers a value
        let v = xi_q0(&p, t, 1e-10).unwrap();
        let s = xi_q0_sum(&p, t, 100_000_000, 1e-10).unwrap().value;
        assert_eq!(v, s);
    }

    #[test]
    fn mode_expansion_matches_sinh_kernel() {
        let p = overdamped(1.0);
        let nu = p.nu.unwrap();
        let tau = 2.0 / nu;
        let modes = noise_kernel_modes_for_tolerance(&p, tau, 1e-13).unwrap();
        let direct = noise_kernel_direct(&p, tau).unwrap();
        let sum = modes.evaluate(tau).unwrap();
        assert!(modes.tail_bound <= 1e-13);
        assert!((sum - direct).abs() <= 1e-12, "{sum} vs {direct}");
        assert!(modes.prefactors.iter().all(|&w| w < 0.0));
        for n in 1..=modes.n_max {
            assert!((modes.counterterm(n) - 2.0 * modes.white_weight).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_decays_to_zero_from_below() {
        let p = overdamped(1.0);
        let far = noise_kernel_direct(&p, 1e3).unwrap();
        assert!(far <= 0.0 && far.abs() < 1e-300);
        assert!(noise_kernel_direct(&p, 1.0).unwrap() < 0.0);
    }

    #[test]
    fn truncated_modes_within_certified_tail() {
        let p = PhysicalParams::reduced(1.0, 0.5, 1.0, 1.0, 1.0).unwrap();
        let nu = p.nu.unwrap();
        for &nt in &[0.5, 1.0, 3.0] {
            let t_min = nt / nu;
            let modes = noise_kernel_modes(&p, 12, t_min).unwrap();
            for &scale in &[1.0, 1.5, 4.0] {
                let tau = t_min * scale;
                let err = (modes.evaluate(tau).unwrap() - noise_kernel_direct(&p, tau).unwrap()).abs();
                assert!(err <= modes.tail_bound * (1.0 + 1e-12) + 1e-15);
            }
        }
        assert!(noise_kernel_modes(&p, 12, 0.5 / nu).unwrap().evaluate(0.1 / nu).is_err());
    }
}
