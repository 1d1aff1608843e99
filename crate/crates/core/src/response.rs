//! Susceptibilities of the damped oscillator, the drift function and the
//! drift velocity.
//!
//! With `x = omega t / 2` (complex, purely imaginary when underdamped):
//!
//! ```text
//! chi_v     = e^{-gamma t/2} t shc(x)
//! chi_q     = e^{-gamma t/2} [cosh x + (gamma t / 2) shc x]
//! chi_v_dot = e^{-gamma t/2} [cosh x - (gamma t / 2) shc x]
//! chi_q_dot = -(omega0^2 / M) chi_v
//! ```
//!
//! where `shc(x) = sinh(x) / x`. All regimes share this path; the critical
//! case is the `x -> 0` limit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PhysicalParams, Regime};

/// Below this `|omega t|` the hyperbolic functions use their Taylor series.
pub const TAYLOR_SWITCH: f64 = 1e-4;

/// `|chi_q|` relative to its local amplitude below which `Omega` is treated as
/// sitting on a pole.
pub const POLE_TOL: f64 = 1e-12;

const IMAG_RESIDUE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Susceptibilities {
    pub chi_q: f64,
    pub chi_v: f64,
    pub chi_q_dot: f64,
    pub chi_v_dot: f64,
}

/// The four functions with the common decay factor `e^{log_scale}` removed.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    log_scale: f64,
    /// `cosh x` part.
    ch: f64,
    /// `(gamma t / 2) shc x` part.
    gsh: f64,
    /// `t shc x`.
    tsh: f64,
}

fn real_part(z: Complex64) -> f64 {
    debug_assert!(
        z.im.abs() <= IMAG_RESIDUE_TOL * z.re.abs().max(1.0),
        "imaginary residue {z}"
    );
    z.re
}

fn scaled(p: &PhysicalParams, t: f64) -> Scaled {
    let omega = p.omega();
    let x = omega * (0.5 * t);
    let half_gt = 0.5 * p.gamma * t;
    let taylor = (omega * t).norm() < TAYLOR_SWITCH;
    let a = if taylor { 0.0 } else { x.re.abs() };
    let (ch, shc) = if taylor {
        let x2 = x * x;
        (1.0 + x2 / 2.0, 1.0 + x2 / 6.0)
    } else if a < 20.0 {
        let e = (-a).exp();
        (x.cosh() * e, x.sinh() / x * e)
    } else {
        // real x large: the e^{-x} branch is below rounding
        let e = (x - a).exp();
        (0.5 * e, 0.5 * e / x)
    };
    Scaled {
        log_scale: a - half_gt,
        ch: real_part(ch),
        gsh: half_gt * real_part(shc),
        tsh: t * real_part(shc),
    }
}

fn check_time(t: f64) {
    assert!(t >= 0.0 && t.is_finite(), "susceptibilities need finite t >= 0, got {t}");
}

impl Susceptibilities {
    pub fn at(p: &PhysicalParams, t: f64) -> Self {
        check_time(t);
        let s = scaled(p, t);
        let f = s.log_scale.exp();
        let chi_v = f * s.tsh;
        Self {
            chi_q: f * (s.ch + s.gsh),
            chi_v,
            chi_q_dot: -p.rate() * chi_v,
            chi_v_dot: f * (s.ch - s.gsh),
        }
    }
}

pub fn chi_v(p: &PhysicalParams, t: f64) -> f64 {
    Susceptibilities::at(p, t).chi_v
}

pub fn chi_q(p: &PhysicalParams, t: f64) -> f64 {
    Susceptibilities::at(p, t).chi_q
}

pub fn chi_q_dot(p: &PhysicalParams, t: f64) -> f64 {
    Susceptibilities::at(p, t).chi_q_dot
}

pub fn chi_v_dot(p: &PhysicalParams, t: f64) -> f64 {
    Susceptibilities::at(p, t).chi_v_dot
}

/// Zeros of `chi_q` in `(0, t_max]`. Only the underdamped regime has any.
pub fn chi_q_zeros(p: &PhysicalParams, t_max: f64) -> Vec<f64> {
    if p.regime != Regime::Underdamped {
        return Vec::new();
    }
    let w = (-p.omega_sq).sqrt();
    let first = std::f64::consts::PI - w.atan2(p.gamma);
    (0..)
        .map(|m| 2.0 * (first + m as f64 * std::f64::consts::PI) / w)
        .take_while(|&t| t <= t_max)
        .collect()
}

/// Zero of `chi_q` closest to `t`, if any.
pub fn nearest_pole(p: &PhysicalParams, t: f64) -> Option<f64> {
    if p.regime != Regime::Underdamped {
        return None;
    }
    let w = (-p.omega_sq).sqrt();
    let first = std::f64::consts::PI - w.atan2(p.gamma);
    let period = 2.0 * std::f64::consts::PI / w;
    let t0 = 2.0 * first / w;
    let m = ((t - t0) / period).round().max(0.0);
    Some(t0 + m * period)
}

/// `Omega(t) = chi_q_dot / chi_q`.
///
/// Evaluated on the rescaled functions so the ratio stays finite after both
/// factors underflow.
pub fn omega_drift(p: &PhysicalParams, t: f64) -> Result<f64> {
    check_time(t);
    let s = scaled(p, t);
    let q = s.ch + s.gsh;
    if q.abs() <= POLE_TOL * (s.ch.abs() + s.gsh.abs()) {
        return Err(Error::PoleAtChiQZero {
            t,
            pole: nearest_pole(p, t).unwrap_or(t),
        });
    }
    Ok(-p.rate() * s.tsh / q)
}

/// `tanh(omega t / 2) / omega`, regular at `omega = 0`; infinite at the
/// underdamped poles of the tangent.
pub fn tanh_ratio(p: &PhysicalParams, t: f64) -> Complex64 {
    let omega = p.omega();
    let x = omega * (0.5 * t);
    if (omega * t).norm() < TAYLOR_SWITCH {
        0.5 * t * (1.0 - x * x / 3.0)
    } else if x.re.abs() > 20.0 {
        Complex64::new(x.re.signum(), 0.0) / omega
    } else {
        x.tanh() / omega
    }
}

/// Hyperbolic-tangent form `Omega = -2 k tanh(x) / (omega + gamma tanh(x))`,
/// `k = omega0^2 / M`; an independent route to [`omega_drift`].
pub fn omega_drift_closed(p: &PhysicalParams, t: f64) -> Result<f64> {
    check_time(t);
    let th_over_omega = tanh_ratio(p, t);
    let denom = 1.0 + p.gamma * th_over_omega;
    if denom.norm() <= POLE_TOL * (1.0 + (p.gamma * th_over_omega).norm()) || !denom.is_finite() {
        return Err(Error::PoleAtChiQZero {
            t,
            pole: nearest_pole(p, t).unwrap_or(t),
        });
    }
    Ok(real_part(-2.0 * p.rate() * th_over_omega / denom))
}

/// `v_bar(t) = chi_q_dot q0 + chi_v_dot v0`.
pub fn drift_velocity(p: &PhysicalParams, t: f64, q0: f64, v0: f64) -> f64 {
    let s = Susceptibilities::at(p, t);
    s.chi_q_dot * q0 + s.chi_v_dot * v0
}

/// Mean position `chi_q q0 + chi_v v0`, the time integral of the drift velocity.
pub fn mean_position(p: &PhysicalParams, t: f64, q0: f64, v0: f64) -> f64 {
    let s = Susceptibilities::at(p, t);
    s.chi_q * q0 + s.chi_v * v0
}
