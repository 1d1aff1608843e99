//! Time-dependent Fokker-Planck coefficients.
//!
//! Notation: `k = omega0^2 / M`, `A = 2 gamma M k_B T`. The susceptibilities
//! are written as divided differences over the roots,
//! `chi_v(u) = -Δ_λ e^{-λu}`, `chi_v_dot(u) = Δ_λ λ e^{-λu}`,
//! `chi_q(u) = Δ_λ (λ - gamma) e^{-λu}`, so every time integral against
//! exponentials is closed form.
//!
//! Quantum noise enters through the kernel
//! `A δ(τ) + \sum_n A [2 δ(τ) - ν_n e^{-ν_n |τ|}]` (each mode carries the
//! contact term that cancels its integral). Mode `n` contributes
//!
//! ```text
//! D1_n(t)  = (2A/M^2) chi_v(t) h_n(t),   h_n(t) = \int_0^t e^{-ν_n (t-s)} chi_v_dot(s) ds
//! var_n(t) = \int_0^t D1_n
//! ```
//!
//! For large `n`, `D1_n ~ (2A / (M^2 ν n)) chi_v chi_v_dot`: the mode sum grows
//! like `ln n_max`. `n_max` is therefore a genuine cutoff; the coefficient of
//! the logarithm and an estimate of the convergent remainder are reported.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, VERSION};
use crate::model::PhysicalParams;
use crate::response::{self, Susceptibilities};
use crate::special::contour::{divided_difference, divided_difference_2};
use crate::special::matsubara::xi_q0;
use crate::special::phi::{exp_dd, laplace_window, laplace_window_dd};
use crate::special::quad::tanh_sinh;
use crate::special::sum::CompensatedSum;

/// Root separation `|λ1 - λ2| t` below which divided differences switch to
/// the contour form.
const DD_SWITCH: f64 = 0.1;

/// Quantum coefficients are evaluated for `ν t >= NU_T_MIN`.
pub const NU_T_MIN: f64 = 0.01;

/// `ν t n_max` required for the last retained mode to be asymptotic.
pub const ASYMPTOTIC_NU_T: f64 = 10.0;

/// Hard cap on the correlation-integral series.
const MAX_CORRELATION_TERMS: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumOptions {
    /// Number of Matsubara modes kept in the noise kernel.
    pub n_max: usize,
    /// Absolute tolerance for the convergent series and quadratures.
    pub tol: f64,
}

impl Default for QuantumOptions {
    fn default() -> Self {
        Self {
            n_max: 1000,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Mode {
    Classical,
    Quantum(QuantumOptions),
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Classical => "classical",
            Mode::Quantum(_) => "quantum",
        }
    }
}

fn real_dd<F: Fn(Complex64) -> Complex64>(p: &PhysicalParams, t: f64, f: F) -> f64 {
    divided_difference(f, p.lambda1, p.lambda2, 1.0 / t, DD_SWITCH).re
}

fn real_dd2<F: Fn(Complex64, Complex64) -> Complex64>(p: &PhysicalParams, t: f64, f: F) -> f64 {
    divided_difference_2(f, p.lambda1, p.lambda2, 1.0 / t, DD_SWITCH).re
}

/// `\int_0^t chi_v(u)^2 du`.
pub fn chi_v_sq_integral(p: &PhysicalParams, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    real_dd2(p, t, |a, b| laplace_window(a + b, t))
}

// ---------------------------------------------------------------- classical

/// `D1_CL = (2 k_B T gamma / M) chi_v^2`, the derivative of [`sigma1_classical`].
pub fn d1_classical(p: &PhysicalParams, t: f64) -> f64 {
    let v = response::chi_v(p, t);
    2.0 * p.kt() * p.gamma / p.mass * v * v
}

/// `sigma1_CL = (2 k_B T gamma / M) \int_0^t chi_v^2`.
pub fn sigma1_classical(p: &PhysicalParams, t: f64) -> f64 {
    2.0 * p.kt() * p.gamma / p.mass * chi_v_sq_integral(p, t)
}

/// `(sinh x, cosh x)` at `x = omega t / 2` with `1 / omega` factors folded in:
/// returns `(t shc(x), cosh x)`. Overflows for `|Re omega t| > ~1400`.
fn hyperbolic_pair(p: &PhysicalParams, t: f64) -> (Complex64, Complex64) {
    let omega = p.omega();
    let x = omega * (0.5 * t);
    if (omega * t).norm() < response::TAYLOR_SWITCH {
        let x2 = x * x;
        (t * (1.0 + x2 / 6.0), 1.0 + x2 / 2.0)
    } else {
        (2.0 * x.sinh() / omega, x.cosh())
    }
}

/// `sigma1_CL` written with hyperbolic functions:
/// `(k_B T / omega0^2) [1 - e^{-gamma t} (2 gamma^2 / omega^2 sinh^2 x + (gamma/omega) sinh 2x + 1)]`.
/// Intended for moderate `t` only.
pub fn sigma1_classical_hyperbolic(p: &PhysicalParams, t: f64) -> f64 {
    let (tsh, ch) = hyperbolic_pair(p, t);
    // sinh x / omega = tsh / 2, sinh 2x / omega = tsh cosh x
    let g = p.gamma;
    let bracket = 0.5 * g * g * tsh * tsh + g * tsh * ch + 1.0;
    p.kt() / p.omega0_sq * (1.0 - (-g * t).exp() * bracket.re)
}

/// `sigma_CL = (k_B T / omega0^2) [1 - e^{-gamma t} (cosh x + (gamma/omega) sinh x)^2]`.
pub fn sigma_classical_closed(p: &PhysicalParams, t: f64) -> f64 {
    let (tsh, ch) = hyperbolic_pair(p, t);
    let inner = ch + 0.5 * p.gamma * tsh;
    p.kt() / p.omega0_sq * (1.0 - (-p.gamma * t).exp() * (inner * inner).re)
}

/// `D_CL = 4 k_B T sinh x / (M (gamma sinh x + omega cosh x))`.
pub fn d_classical_closed(p: &PhysicalParams, t: f64) -> Result<f64> {
    let th = response::tanh_ratio(p, t);
    let denom = 1.0 + p.gamma * th;
    if denom.norm() <= response::POLE_TOL * (1.0 + (p.gamma * th).norm()) || !denom.is_finite() {
        return Err(Error::PoleAtChiQZero {
            t,
            pole: response::nearest_pole(p, t).unwrap_or(t),
        });
    }
    Ok((4.0 * p.kt() / p.mass * th / denom).re)
}

// ---------------------------------------------------------------- quantum

/// Earliest time at which quantum coefficients are available.
pub fn t_min(p: &PhysicalParams) -> Result<f64> {
    Ok(NU_T_MIN / p.matsubara()?)
}

/// Contribution of one kernel mode with rate `c`: `(D1_n, var_n)`.
pub fn mode_contribution(p: &PhysicalParams, t: f64, c: f64, chi_v: f64) -> (f64, f64) {
    let amp = 2.0 * p.gamma * p.kt() / p.mass;
    let c = Complex64::new(c, 0.0);
    let h = real_dd(p, t, |l| l * exp_dd(l, c, t));
    let var = real_dd2(p, t, |a, b| b * laplace_window_dd(a + b, a + c, t));
    (2.0 * amp * chi_v * h, 2.0 * amp * var)
}

/// `2 \int_0^t chi_q(s) <xi(s) q(0)> ds`.
///
/// Uses `<xi(s) q(0)> = -(2 gamma / beta) [-ln(1 - e^{-νs}) / ν - \sum_n r_n e^{-ν_n s}]`
/// with `r_n = (gamma ν_n + k) / (ν_n (ν_n^2 + gamma ν_n + k))`; the logarithm is
/// integrated by quadrature, the series term by term.
pub fn sigma1_correlation(p: &PhysicalParams, t: f64, tol: f64) -> Result<f64> {
    let nu = p.matsubara()?;
    if t == 0.0 || p.gamma == 0.0 {
        return Ok(0.0);
    }
    let pref = 4.0 * p.gamma / p.beta;
    let k = p.rate();
    let g = p.gamma;

    let log_part = |s: f64| -> f64 {
        let l = -(-(-nu * s).exp_m1()).ln();
        response::chi_q(p, s) * l
    };
    let split = t.min(50.0 / nu);
    let quad_tol = 0.25 * tol * nu / pref;
    let mut log_int = tanh_sinh(log_part, 0.0, split, quad_tol, 1e-14)?.value;
    if t > split {
        log_int += tanh_sinh(log_part, split, t, quad_tol, 1e-14)?.value;
    }

    let series_tol = 0.25 * tol / pref;
    let mut sum = CompensatedSum::new();
    let mut n = 1usize;
    loop {
        let c = n as f64 * nu;
        let quad = c * c + g * c + k;
        let r = (g * c + k) / (c * quad);
        let i_n = if c * t > 40.0 + p.lambda1.re.max(p.lambda2.re) * t {
            (c + g) / quad
        } else {
            let cc = Complex64::new(c, 0.0);
            real_dd(p, t, |l| (l - g) * laplace_window(l + cc, t))
        };
        sum.add(r * i_n);
        let nf = n as f64;
        let tail = g / (2.0 * nu.powi(3) * nf * nf) + k / (3.0 * nu.powi(4) * nf * nf * nf);
        if tail <= series_tol {
            break;
        }
        n += 1;
        if n > MAX_CORRELATION_TERMS {
            return Err(Error::TailNotBounded {
                tol,
                n_max: MAX_CORRELATION_TERMS,
            });
        }
    }
    Ok(-pref * (log_int / nu - sum.value()))
}

/// Quantum coefficients at one time with their truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumTerms {
    pub d1: f64,
    pub sigma1: f64,
    /// `<xi(t) q(0)>`.
    pub xi_q0: f64,
    /// `2 \int_0^t chi_q <xi q(0)>`, included in `sigma1`.
    pub sigma1_correlation: f64,
    pub modes: usize,
    /// `D1(n_max) ≈ const + d1_log_coefficient * ln n_max`.
    pub d1_log_coefficient: f64,
    pub sigma1_log_coefficient: f64,
    /// Estimated size of the convergent part of the dropped modes.
    pub d1_tail_estimate: f64,
    pub sigma1_tail_estimate: f64,
}

pub fn quantum_terms(p: &PhysicalParams, t: f64, opts: QuantumOptions) -> Result<QuantumTerms> {
    let nu = p.matsubara()?;
    if !(t >= NU_T_MIN / nu) || !t.is_finite() {
        return Err(Error::InvalidInput(format!(
            "quantum coefficients need t >= {} (nu t >= {NU_T_MIN}), got {t}",
            NU_T_MIN / nu
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let n_max = opts.n_max;
    if nu * n_max as f64 * t < ASYMPTOTIC_NU_T {
        return Err(Error::TailNotBounded {
            tol: opts.tol,
            n_max,
        });
    }
    let s = Susceptibilities::at(p, t);
    let amp = 2.0 * p.gamma * p.kt() / p.mass;

    let mut d1_modes = CompensatedSum::new();
    let mut var_modes = CompensatedSum::new();
    let (mut last_d1, mut last_var) = (0.0, 0.0);
    for n in 1..=n_max {
        let (d, v) = mode_contribution(p, t, n as f64 * nu, s.chi_v);
        d1_modes.add(d);
        var_modes.add(v);
        last_d1 = d;
        last_var = v;
    }
    let nf = n_max as f64;
    let d1_log = 2.0 * amp / nu * s.chi_v * s.chi_v_dot;
    let var_log = amp / nu * s.chi_v * s.chi_v;

    let xi = xi_q0(p, t, opts.tol)?;
    let corr = sigma1_correlation(p, t, opts.tol)?;

    let d1 = d1_classical(p, t) + d1_modes.value() + 2.0 * s.chi_q * xi;
    let sigma1 = sigma1_classical(p, t) + var_modes.value() + corr;
    if !d1.is_finite() {
        return Err(Error::NonFiniteCoefficient { name: "d1", t });
    }
    if !sigma1.is_finite() {
        return Err(Error::NonFiniteCoefficient { name: "sigma1", t });
    }
    Ok(QuantumTerms {
        d1,
        sigma1,
        xi_q0: xi,
        sigma1_correlation: corr,
        modes: n_max,
        d1_log_coefficient: d1_log,
        sigma1_log_coefficient: var_log,
        d1_tail_estimate: ((last_d1 - d1_log / nf) * nf).abs(),
        sigma1_tail_estimate: ((last_var - var_log / nf) * nf).abs(),
    })
}

/// `D1(t) = 2 [\int_0^t <φv(t) φv(t')> dt' + chi_q(t) <xi(t) q(0)>]` with the
/// kernel truncated at `n_max` modes.
pub fn d1_quantum(p: &PhysicalParams, t: f64, n_max: usize, tol: f64) -> Result<f64> {
    quantum_terms(p, t, QuantumOptions { n_max, tol }).map(|q| q.d1)
}

/// `sigma1(t) = \int_0^t D1`.
pub fn sigma1_quantum(p: &PhysicalParams, t: f64, n_max: usize, tol: f64) -> Result<f64> {
    quantum_terms(p, t, QuantumOptions { n_max, tol }).map(|q| q.sigma1)
}

// ---------------------------------------------------------------- combined

/// Every coefficient at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPoint {
    pub t: f64,
    pub chi_q: f64,
    pub chi_v: f64,
    pub chi_q_dot: f64,
    pub chi_v_dot: f64,
    /// `NaN` on a pole of the drift function.
    pub omega: f64,
    pub d1: f64,
    pub sigma1: f64,
    pub sigma_q: f64,
    pub sigma_q_dot: f64,
    /// `NaN` on a pole of the drift function.
    pub d_fpe: f64,
    pub pole: bool,
    pub quantum: Option<QuantumTerms>,
}

pub fn evaluate(p: &PhysicalParams, t: f64, mode: Mode) -> Result<CoefficientPoint> {
    let s = Susceptibilities::at(p, t);
    let (d1, sigma1, quantum) = match mode {
        Mode::Classical => (d1_classical(p, t), sigma1_classical(p, t), None),
        Mode::Quantum(opts) => {
            let q = quantum_terms(p, t, opts)?;
            (q.d1, q.sigma1, Some(q))
        }
    };
    let thermal = p.kt() / p.mass;
    let sigma_q = sigma1 + thermal * s.chi_v * s.chi_v;
    let sigma_q_dot = d1 + 2.0 * thermal * s.chi_v * s.chi_v_dot;
    let (omega, d_fpe, pole) = match response::omega_drift(p, t) {
        Ok(w) => (w, sigma_q_dot - 2.0 * sigma_q * w, false),
        Err(Error::PoleAtChiQZero { .. }) => (f64::NAN, f64::NAN, true),
        Err(e) => return Err(e),
    };
    Ok(CoefficientPoint {
        t,
        chi_q: s.chi_q,
        chi_v: s.chi_v,
        chi_q_dot: s.chi_q_dot,
        chi_v_dot: s.chi_v_dot,
        omega,
        d1,
        sigma1,
        sigma_q,
        sigma_q_dot,
        d_fpe,
        pole,
        quantum,
    })
}

/// `sigma_Q = sigma1 + (k_B T / M) chi_v^2`.
pub fn sigma_q(p: &PhysicalParams, t: f64, mode: Mode) -> Result<f64> {
    let sigma1 = match mode {
        Mode::Classical => sigma1_classical(p, t),
        Mode::Quantum(o) => quantum_terms(p, t, o)?.sigma1,
    };
    let v = response::chi_v(p, t);
    Ok(sigma1 + p.kt() / p.mass * v * v)
}

/// `D = dsigma_Q/dt - 2 sigma_Q Omega` with the exact derivative
/// `dsigma_Q/dt = D1 + (2 k_B T / M) chi_v chi_v_dot`.
pub fn d_fpe(p: &PhysicalParams, t: f64, mode: Mode) -> Result<f64> {
    response::omega_drift(p, t)?;
    Ok(evaluate(p, t, mode)?.d_fpe)
}

// ---------------------------------------------------------------- table

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub params: PhysicalParams,
    pub mode: Mode,
    pub t: Vec<f64>,
    pub chi_q: Vec<f64>,
    pub chi_v: Vec<f64>,
    pub omega: Vec<f64>,
    pub d1: Vec<f64>,
    pub sigma1: Vec<f64>,
    pub sigma_q: Vec<f64>,
    pub sigma_q_dot: Vec<f64>,
    pub d_fpe: Vec<f64>,
    /// False on rows sitting on a drift pole.
    pub valid: Vec<bool>,
    /// Zeros of `chi_q` inside the grid span.
    pub poles: Vec<f64>,
    /// Pole-free open intervals covering the grid span.
    pub valid_windows: Vec<(f64, f64)>,
    /// Per-row `(d1_tail_estimate, d1_log_coefficient)` in quantum mode.
    pub tails: Option<Vec<(f64, f64)>>,
}

/// JSON sidecar written next to the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableSidecar {
    pub version: String,
    pub params: PhysicalParams,
    pub mode: Mode,
    pub rows: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub poles: Vec<f64>,
    pub valid_windows: Vec<(f64, f64)>,
    pub negative_d_fpe_rows: Vec<usize>,
    pub max_d1_tail_estimate: Option<f64>,
    pub d1_log_coefficient_range: Option<(f64, f64)>,
    pub columns: Vec<String>,
}

pub const TABLE_COLUMNS: [&str; 6] = ["t", "omega", "d1", "sigma1", "sigma_q", "d_fpe"];

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidInput("time grid is empty".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidInput("time grid must be finite and nonnegative".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Pole-free open intervals of `[t0, t1]`.
pub fn valid_windows(p: &PhysicalParams, t0: f64, t1: f64) -> (Vec<f64>, Vec<(f64, f64)>) {
    let poles: Vec<f64> = response::chi_q_zeros(p, t1)
        .into_iter()
        .filter(|&z| z >= t0)
        .collect();
    let mut windows = Vec::new();
    let mut start = t0;
    for &z in &poles {
        if z > start {
            windows.push((start, z));
        }
        start = z;
    }
    if t1 > start {
        windows.push((start, t1));
    }
    (poles, windows)
}

pub fn build_table(p: &PhysicalParams, t_grid: &[f64], mode: Mode) -> Result<CoefficientTable> {
    check_grid(t_grid)?;
    if let Mode::Quantum(_) = mode {
        let tm = t_min(p)?;
        if t_grid[0] < tm {
            return Err(Error::InvalidInput(format!(
                "quantum table must start at t >= t_min = {tm}, got {}",
                t_grid[0]
            )));
        }
    }
    let results: Vec<Result<CoefficientPoint>> = t_grid.par_iter().map(|&t| evaluate(p, t, mode)).collect();
    let mut points = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(pt) => points.push(pt),
            Err(e) => errors.push((i, e)),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Table(errors));
    }
    let col = |f: fn(&CoefficientPoint) -> f64| points.iter().map(f).collect::<Vec<_>>();
    let (poles, windows) = valid_windows(p, t_grid[0], *t_grid.last().unwrap());
    let tails = matches!(mode, Mode::Quantum(_)).then(|| {
        points
            .iter()
            .map(|pt| {
                let q = pt.quantum.expect("quantum terms present");
                (q.d1_tail_estimate, q.d1_log_coefficient)
            })
            .collect()
    });
    Ok(CoefficientTable {
        params: *p,
        mode,
        t: t_grid.to_vec(),
        chi_q: col(|x| x.chi_q),
        chi_v: col(|x| x.chi_v),
        omega: col(|x| x.omega),
        d1: col(|x| x.d1),
        sigma1: col(|x| x.sigma1),
        sigma_q: col(|x| x.sigma_q),
        sigma_q_dot: col(|x| x.sigma_q_dot),
        d_fpe: col(|x| x.d_fpe),
        valid: points.iter().map(|x| !x.pole).collect(),
        poles,
        valid_windows: windows,
        tails,
    })
}

/// `n` equally spaced times in `[t_start, t_end]`.
pub fn linear_grid(t_start: f64, t_end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t_start],
        _ => (0..n)
            .map(|i| t_start + (t_end - t_start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl CoefficientTable {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| {
            vec![
                self.t[i],
                self.omega[i],
                self.d1[i],
                self.sigma1[i],
                self.sigma_q[i],
                self.d_fpe[i],
            ]
        })
    }

    pub fn sidecar(&self) -> TableSidecar {
        let negative = (0..self.len())
            .filter(|&i| self.d_fpe[i] < 0.0)
            .collect();
        let tails = self.tails.as_ref();
        TableSidecar {
            version: VERSION.to_string(),
            params: self.params,
            mode: self.mode,
            rows: self.len(),
            t_min: self.t[0],
            t_max: *self.t.last().unwrap(),
            poles: self.poles.clone(),
            valid_windows: self.valid_windows.clone(),
            negative_d_fpe_rows: negative,
            max_d1_tail_estimate: tails.map(|v| v.iter().map(|x| x.0).fold(0.0, f64::max)),
            d1_log_coefficient_range: tails.map(|v| {
                v.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x.1), hi.max(x.1)))
            }),
            columns: TABLE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Writes `<stem>.csv` and `<stem>.json`.
    pub fn write(&self, dir: &std::path::Path, stem: &str) -> Result<()> {
        io::write_csv(dir.join(format!("{stem}.csv")), &TABLE_COLUMNS, self.rows())?;
        io::write_json(dir.join(format!("{stem}.json")), &self.sidecar())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn overdamped(hbar: f64) -> PhysicalParams {
        PhysicalParams::reduced(1.0, 1.0, 0.16, 1.0, hbar).unwrap()
    }

    fn grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
        linear_grid(t0, t1, n)
    }

    #[test]
    fn classical_start_at_zero() {
        let p = overdamped(0.0);
        assert_eq!(d1_classical(&p, 0.0), 0.0);
        assert_eq!(sigma1_classical(&p, 0.0), 0.0);
        assert_eq!(d_fpe(&p, 0.0, Mode::Classical).unwrap(), 0.0);
        assert_eq!(sigma_q(&p, 0.0, Mode::Classical).unwrap(), 0.0);
        assert_eq!(d_classical_closed(&p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn classical_long_time_limits() {
        let p = overdamped(0.0);
        let t = 80.0;
        let eq = p.kt() / p.omega0_sq;
        assert!(d1_classical(&p, t) < 1e-10);
        assert!((sigma1_classical(&p, t) - eq).abs() < 1e-10);
        assert!((sigma_q(&p, t, Mode::Classical).unwrap() - eq).abs() < 1e-10);
        let w = p.omega_sq.sqrt();
        let d_inf = 4.0 * p.kt() / (p.mass * (p.gamma + w));
        assert!((d_fpe(&p, t, Mode::Classical).unwrap() - d_inf).abs() < 1e-10);
    }

    #[test]
    fn sigma1_is_integral_of_d1() {
        for p in [
            overdamped(0.0),
            PhysicalParams::reduced(1.0, 2.0, 1.0, 1.0, 0.0).unwrap(),
            PhysicalParams::reduced(1.0, 0.5, 1.0, 1.0, 0.0).unwrap(),
        ] {
            for &t in &[0.3, 1.0, 4.0, 9.0] {
                let q = tanh_sinh(|s| d1_classical(&p, s), 0.0, t, 1e-16, 1e-14).unwrap();
                let s1 = sigma1_classical(&p, t);
                assert!((s1 - q.value).abs() <= 1e-10 * s1, "{:?} t={t}", p.regime);
            }
        }
    }

    #[test]
    fn hyperbolic_forms_agree_with_integrals() {
        for p in [
            overdamped(0.0),
            PhysicalParams::reduced(1.0, 2.0, 1.0, 1.0, 0.0).unwrap(),
            PhysicalParams::reduced(1.0, 0.5, 1.0, 1.0, 0.0).unwrap(),
        ] {
            for t in grid(0.1, 10.0, 100) {
                let v = response::chi_v(&p, t);
                let generic = sigma1_classical(&p, t) + p.kt() / p.mass * v * v;
                let printed = sigma_classical_closed(&p, t);
                assert!((generic - printed).abs() <= 1e-12 * printed, "{:?} t={t}", p.regime);
                let s1 = sigma1_classical(&p, t);
                assert!((s1 - sigma1_classical_hyperbolic(&p, t)).abs() <= 1e-11 * s1.max(1e-3));
            }
        }
    }

    #[test]
    fn stationarity_at_late_times() {
        let p = overdamped(0.0);
        let t = 50.0 / p.gamma;
        let w = p.omega_sq.sqrt();
        let target = 4.0 * p.kt() / (p.mass * (p.gamma + w));
        let om = response::omega_drift(&p, t).unwrap();
        let sig = sigma_classical_closed(&p, t);
        let d = d_classical_closed(&p, t).unwrap();
        assert!((d - target).abs() < 1e-8);
        assert!((-2.0 * sig * om - target).abs() < 1e-8);
    }

    #[test]
    fn generic_diffusion_matches_closed_form() {
        for p in [
            overdamped(0.0),
            PhysicalParams::reduced(1.0, 2.0, 1.0, 1.0, 0.0).unwrap(),
            PhysicalParams::reduced(1.0, 0.5, 1.0, 1.0, 0.0).unwrap(),
        ] {
            let zeros = response::chi_q_zeros(&p, 10.0);
            for t in grid(0.0, 10.0, 101) {
                if zeros.iter().any(|z| (z - t).abs() < 1e-2) {
                    continue;
                }
                let a = d_fpe(&p, t, Mode::Classical).unwrap();
                let b = d_classical_closed(&p, t).unwrap();
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{:?} t={t}: {a} vs {b}", p.regime);
            }
        }
    }

    #[test]
    fn variance_ode_reproduces_sigma() {
        // sigma' = 2 Omega sigma + D, sigma(0) = 0, classical RK4
        let p = overdamped(0.0);
        let rhs = |t: f64, s: f64| {
            2.0 * response::omega_drift(&p, t).unwrap() * s + d_classical_closed(&p, t).unwrap()
        };
        let (mut t, mut s) = (0.0, 0.0);
        let h = 1e-3;
        for _ in 0..5000 {
            let k1 = rhs(t, s);
            let k2 = rhs(t + h / 2.0, s + h / 2.0 * k1);
            let k3 = rhs(t + h / 2.0, s + h / 2.0 * k2);
            let k4 = rhs(t + h, s + h * k3);
            s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        let exact = sigma_classical_closed(&p, t);
        assert!((s - exact).abs() <= 1e-6 * exact);
    }

    /// `(A/M^2) [2 \int chi_v^2 - c \int\int chi_v chi_v e^{-c|u-u'|}]` by nested quadrature.
    fn mode_variance_by_quadrature(p: &PhysicalParams, t: f64, c: f64) -> f64 {
        let amp = 2.0 * p.gamma * p.kt() / p.mass;
        let inner = |u: f64| {
            tanh_sinh(|w| response::chi_v(p, w) * (-c * (u - w)).exp(), 0.0, u, 1e-15, 1e-13)
                .unwrap()
                .value
        };
        let outer = tanh_sinh(|u| response::chi_v(p, u) * inner(u), 0.0, t, 1e-15, 1e-12)
            .unwrap()
            .value;
        amp * (2.0 * chi_v_sq_integral(p, t) - 2.0 * c * outer)
    }

    #[test]
    fn mode_variance_matches_quadrature_in_all_regimes() {
        for p in [
            overdamped(1.0),
            PhysicalParams::reduced(1.0, 2.0, 1.0, 1.0, 1.0).unwrap(),
            PhysicalParams::reduced(1.0, 0.5, 1.0, 1.0, 1.0).unwrap(),
        ] {
            for &(t, c) in &[(0.7, 3.0), (2.0, 0.2), (2.0, 1.0), (5.0, 40.0)] {
                let (_, var) = mode_contribution(&p, t, c, response::chi_v(&p, t));
                let oracle = mode_variance_by_quadrature(&p, t, c);
                assert!((var - oracle).abs() <= 1e-9 * oracle.abs().max(1e-6), "{:?} t={t} c={c}: {var} vs {oracle}", p.regime);
            }
        }
    }

    #[test]
    fn mode_d1_is_derivative_of_mode_variance() {
        let p = PhysicalParams::reduced(1.0, 0.8, 1.0, 1.0, 1.0).unwrap();
        let c = 2.5;
        let h = 1e-4;
        for &t in &[0.4, 1.5, 6.0] {
            let var = |s: f64| mode_contribution(&p, s, c, response::chi_v(&p, s)).1;
            let fd = (var(t + h) - var(t - h)) / (2.0 * h);
            let (d1, _) = mode_contribution(&p, t, c, response::chi_v(&p, t));
            assert!((d1 - fd).abs() <= 1e-7 * d1.abs().max(1e-3));
        }
    }

    #[test]
    fn resonant_mode_is_finite() {
        // c equal to a real root of the overdamped pair
        let p = overdamped(1.0);
        let (d1, var) = mode_contribution(&p, 2.0, p.lambda1.re, response::chi_v(&p, 2.0));
        let (d1b, varb) = mode_contribution(&p, 2.0, p.lambda1.re * (1.0 + 1e-9), response::chi_v(&p, 2.0));
        assert!((d1 - d1b).abs() < 1e-9 && (var - varb).abs() < 1e-9);
    }

    #[test]
    fn correlation_integral_derivative() {
        let p = overdamped(1.0);
        let tol = 1e-15;
        for &t in &[0.05, 0.5, 2.0] {
            let h = 2e-4 * t;
            let fd = (sigma1_correlation(&p, t + h, tol).unwrap() - sigma1_correlation(&p, t - h, tol).unwrap())
                / (2.0 * h);
            let exact = 2.0 * response::chi_q(&p, t) * xi_q0(&p, t, tol).unwrap();
            assert!((fd - exact).abs() <= 1e-7 * exact.abs() + 1e-10, "t={t}: {fd} vs {exact}");
        }
    }

    #[test]
    fn quantum_sigma1_integrates_d1() {
        let p = overdamped(1.0);
        let opts = QuantumOptions { n_max: 64, tol: 1e-13 };
        let (ta, tb) = (0.5, 3.0);
        let q = tanh_sinh(|s| quantum_terms(&p, s, opts).unwrap().d1, ta, tb, 1e-13, 1e-11).unwrap();
        let sa = quantum_terms(&p, ta, opts).unwrap().sigma1;
        let sb = quantum_terms(&p, tb, opts).unwrap().sigma1;
        assert!((sb - sa - q.value).abs() <= 1e-8 * sb, "{} vs {}", sb - sa, q.value);
    }

    #[test]
    fn near_classical_collapse() {
        // hbar beta gamma = 1e-4
        let p = overdamped(1e-4);
        let opts = QuantumOptions::default();
        let ts = grid(0.1, 10.0, 25);
        let scale = ts.iter().map(|&t| d1_classical(&p, t)).fold(0.0, f64::max);
        for &t in &ts {
            let q = quantum_terms(&p, t, opts).unwrap();
            assert!((q.d1 - d1_classical(&p, t)).abs() <= 1e-3 * scale, "t={t}");
            let sq = sigma_q(&p, t, Mode::Quantum(opts)).unwrap();
            let sc = sigma_classical_closed(&p, t);
            assert!((sq - sc).abs() <= 1e-3 * sc, "t={t}");
        }
    }

    #[test]
    fn doubling_cutoff_moves_d1_by_logarithm() {
        let p = overdamped(1.0);
        let n = 200;
        let t = 1.5;
        let a = quantum_terms(&p, t, QuantumOptions { n_max: n, tol: 1e-13 }).unwrap();
        let b = quantum_terms(&p, t, QuantumOptions { n_max: 2 * n, tol: 1e-13 }).unwrap();
        let harmonic: f64 = (n + 1..=2 * n).map(|k| 1.0 / k as f64).sum();
        let drift = b.d1 - a.d1 - a.d1_log_coefficient * harmonic;
        assert!(drift.abs() <= a.d1_tail_estimate, "{drift} vs {}", a.d1_tail_estimate);
        let drift_s = b.sigma1 - a.sigma1 - a.sigma1_log_coefficient * harmonic;
        assert!(drift_s.abs() <= a.sigma1_tail_estimate);
    }

    #[test]
    fn quantum_errors() {
        let classical = overdamped(0.0);
        assert_eq!(
            d1_quantum(&classical, 1.0, 100, 1e-10).unwrap_err(),
            Error::HbarZero
        );
        let p = overdamped(1.0);
        assert!(matches!(d1_quantum(&p, 1e-5, 100, 1e-10), Err(Error::InvalidInput(_))));
        // nu n_max t = 2 pi * 1 * 0.1 < 10
        assert!(matches!(d1_quantum(&p, 0.1, 1, 1e-10), Err(Error::TailNotBounded { .. })));
    }

    #[test]
    fn quantum_sigma_correction_is_recorded() {
        let p = overdamped(1.0);
        let t = 8.0;
        let q = sigma_q(&p, t, Mode::Quantum(QuantumOptions::default())).unwrap();
        let c = sigma_classical_closed(&p, t);
        assert!(q.is_finite() && q > 0.0);
        assert!((q - c).abs() < c);
    }

    #[test]
    fn classical_table_matches_pointwise_calls() {
        let p = overdamped(0.0);
        let ts = grid(0.0, 10.0, 50);
        let tab = build_table(&p, &ts, Mode::Classical).unwrap();
        for (i, &t) in ts.iter().enumerate() {
            assert_eq!(tab.d1[i], d1_classical(&p, t));
            assert_eq!(tab.sigma1[i], sigma1_classical(&p, t));
            assert_eq!(tab.d_fpe[i], d_fpe(&p, t, Mode::Classical).unwrap());
            assert_eq!(tab.omega[i], response::omega_drift(&p, t).unwrap());
        }
        assert!(tab.poles.is_empty());
        assert_eq!(tab.valid_windows, vec![(0.0, 10.0)]);
    }

    #[test]
    fn quantum_table_near_classical() {
        let p = overdamped(1e-4);
        let ts = grid(0.1, 10.0, 20);
        let q = build_table(&p, &ts, Mode::Quantum(QuantumOptions::default())).unwrap();
        let c = build_table(&p, &ts, Mode::Classical).unwrap();
        for i in 0..ts.len() {
            assert!((q.sigma_q[i] - c.sigma_q[i]).abs() <= 1e-3 * c.sigma_q[i]);
            assert!((q.d_fpe[i] - c.d_fpe[i]).abs() <= 1e-3 * c.d_fpe[i]);
        }
        assert!(q.tails.is_some());
    }

    #[test]
    fn underdamped_table_reports_poles() {
        let p = PhysicalParams::reduced(1.0, 0.5, 1.0, 1.0, 0.0).unwrap();
        let zeros = response::chi_q_zeros(&p, 10.0);
        let mut ts = grid(0.0, 10.0, 40);
        ts.push(10.5);
        ts.retain(|&t| t != zeros[0]);
        ts.push(zeros[0]);
        ts.sort_by(f64::total_cmp);
        let tab = build_table(&p, &ts, Mode::Classical).unwrap();
        assert!(!tab.poles.is_empty());
        assert_eq!(tab.valid_windows.len(), tab.poles.len() + 1);
        let i = ts.iter().position(|&t| t == zeros[0]).unwrap();
        assert!(!tab.valid[i] && tab.omega[i].is_nan());
    }

    #[test]
    fn table_rejects_bad_grids() {
        let p = overdamped(1.0);
        assert!(build_table(&p, &[], Mode::Classical).is_err());
        assert!(build_table(&p, &[1.0, 0.5], Mode::Classical).is_err());
        assert!(build_table(&p, &[0.0, 1.0], Mode::Quantum(QuantumOptions::default())).is_err());
        let err = build_table(&p, &[0.5, 1.0], Mode::Quantum(QuantumOptions { n_max: 1, tol: 1e-10 })).unwrap_err();
        match err {
            Error::Table(v) => assert_eq!(v[0].0, 0),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn table_files() {
        let p = overdamped(0.0);
        let tab = build_table(&p, &grid(0.0, 10.0, 200), Mode::Classical).unwrap();
        let dir = tempfile::tempdir().unwrap();
        tab.write(dir.path(), "coeffs").unwrap();
        let (h, rows) = io::read_csv(dir.path().join("coeffs.csv")).unwrap();
        assert_eq!(h, TABLE_COLUMNS);
        assert_eq!(rows.len(), 200);
        let side: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("coeffs.json")).unwrap()).unwrap();
        assert_eq!(side["rows"], 200);
        assert_eq!(side["mode"]["mode"], "classical");
    }

    proptest! {
        #[test]
        fn classical_columns_nonnegative(g in 0.05f64..4.0, k in 0.05f64..4.0, t in 0.0f64..30.0) {
            let p = PhysicalParams::reduced(1.0, g, k, 1.0, 0.0).unwrap();
            prop_assert!(sigma1_classical(&p, t) >= -1e-15);
            prop_assert!(sigma_q(&p, t, Mode::Classical).unwrap() >= -1e-15);
            if let Ok(d) = d_classical_closed(&p, t) {
                if !response::nearest_pole(&p, t).is_some_and(|z| (z - t).abs() < 1e-6) {
                    prop_assert!(d >= -1e-12 || p.regime == crate::model::Regime::Underdamped);
                }
            }
        }

        #[test]
        fn sigma1_derivative_is_d1(g in 0.05f64..4.0, k in 0.05f64..4.0, t in 0.1f64..20.0) {
            let p = PhysicalParams::reduced(1.0, g, k, 1.0, 0.0).unwrap();
            let h = 1e-4 * t;
            let fd = (sigma1_classical(&p, t + h) - sigma1_classical(&p, t - h)) / (2.0 * h);
            let d = d1_classical(&p, t);
            // D1 peaks at most at 2 k_B T gamma / omega0^2
            prop_assert!((fd - d).abs() <= 1e-6 * 2.0 * g / k);
        }
    }
}
