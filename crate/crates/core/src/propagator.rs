//! Closed-form Gaussian propagators and their Fokker-Planck residuals.
//!
//! Three densities are provided:
//!
//! * `ConditionalQv`: fixed initial `(q0, v0)`, mean `chi_q q0 + chi_v v0`,
//!   variance `sigma1`. Solves the drift-velocity equation
//!   `p_t + vbar p_q = (D1/2) p_qq`.
//! * `ThermalQ`: `v0` averaged over the Maxwell distribution, mean `chi_q q0`,
//!   variance `sigma_Q`. Solves `p_t = -Omega (q p)_q + (D/2) p_qq`.
//! * `ClassicalQ`: `ThermalQ` with classical coefficients.
//!
//! An optional initial variance `s0^2` widens the delta initial condition;
//! it propagates as `s0^2` (conditional) or `chi_q^2 s0^2` (thermal).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coefficients::{self, Mode};
use crate::error::{Error, Result};
use crate::io;
use crate::model::PhysicalParams;
use crate::response;
use crate::source::CoefficientSource;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityKind {
    ConditionalQv,
    ThermalQ,
    ClassicalQ,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub mean_dot: f64,
    pub variance: f64,
    pub variance_dot: f64,
}

/// Advection term of a one-dimensional Fokker-Planck operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Advection {
    /// `-(Omega q p)_q`.
    Linear(f64),
    /// `-v p_q`.
    Uniform(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDensity {
    pub params: PhysicalParams,
    pub kind: DensityKind,
    pub mode: Mode,
    pub q0: f64,
    pub v0: f64,
    pub initial_variance: f64,
}

impl GaussianDensity {
    pub fn conditional(params: PhysicalParams, mode: Mode, q0: f64, v0: f64) -> Self {
        Self {
            params,
            kind: DensityKind::ConditionalQv,
            mode,
            q0,
            v0,
            initial_variance: 0.0,
        }
    }

    pub fn thermal(params: PhysicalParams, mode: Mode, q0: f64) -> Self {
        Self {
            params,
            kind: DensityKind::ThermalQ,
            mode,
            q0,
            v0: 0.0,
            initial_variance: 0.0,
        }
    }

    pub fn classical(params: PhysicalParams, q0: f64) -> Self {
        Self {
            params,
            kind: DensityKind::ClassicalQ,
            mode: Mode::Classical,
            q0,
            v0: 0.0,
            initial_variance: 0.0,
        }
    }

    pub fn with_initial_variance(mut self, s0_sq: f64) -> Self {
        self.initial_variance = s0_sq;
        self
    }

    fn effective_mode(&self) -> Mode {
        match self.kind {
            DensityKind::ClassicalQ => Mode::Classical,
            _ => self.mode,
        }
    }

    pub fn moments(&self, t: f64) -> Result<Moments> {
        let c = coefficients::evaluate(&self.params, t, self.effective_mode())?;
        let s0 = self.initial_variance;
        Ok(match self.kind {
            DensityKind::ConditionalQv => Moments {
                mean: c.chi_q * self.q0 + c.chi_v * self.v0,
                mean_dot: c.chi_q_dot * self.q0 + c.chi_v_dot * self.v0,
                variance: c.sigma1 + s0,
                variance_dot: c.d1,
            },
            DensityKind::ThermalQ | DensityKind::ClassicalQ => Moments {
                mean: c.chi_q * self.q0,
                mean_dot: c.chi_q_dot * self.q0,
                variance: c.sigma_q + c.chi_q * c.chi_q * s0,
                variance_dot: c.sigma_q_dot + 2.0 * c.chi_q * c.chi_q_dot * s0,
            },
        })
    }

    fn checked(&self, t: f64) -> Result<Moments> {
        let m = self.moments(t)?;
        if !(m.variance > 0.0) {
            return Err(Error::DegenerateVariance { t, variance: m.variance });
        }
        Ok(m)
    }

    pub fn density(&self, q: f64, t: f64) -> Result<f64> {
        let m = self.checked(t)?;
        Ok(normal_pdf(q, m.mean, m.variance))
    }

    pub fn density_grid(&self, q_grid: &[f64], t: f64) -> Result<Vec<f64>> {
        let m = self.checked(t)?;
        Ok(q_grid.iter().map(|&q| normal_pdf(q, m.mean, m.variance)).collect())
    }

    pub fn cdf(&self, q: f64, t: f64) -> Result<f64> {
        let m = self.checked(t)?;
        Ok(stats::normal_cdf(q, m.mean, m.variance.sqrt()))
    }

    /// Pole-free windows of the drift function on `[t0, t1]`; the
    /// conditional density has no poles.
    pub fn validity_windows(&self, t0: f64, t1: f64) -> Vec<(f64, f64)> {
        match self.kind {
            DensityKind::ConditionalQv => vec![(t0, t1)],
            _ => coefficients::valid_windows(&self.params, t0, t1).1,
        }
    }
}

pub fn normal_pdf(q: f64, mean: f64, variance: f64) -> f64 {
    let z = q - mean;
    (-0.5 * z * z / variance).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

/// `max_q |p_t - L p|` for a Gaussian with moments `m` and the operator with
/// the given advection and diffusion `d`.
pub fn residual_from_moments(m: &Moments, advection: Advection, d: f64, q_grid: &[f64]) -> f64 {
    let s = m.variance;
    q_grid
        .iter()
        .map(|&q| {
            let z = q - m.mean;
            let p = normal_pdf(q, m.mean, s);
            let curv = z * z / (s * s) - 1.0 / s; // p_qq / p
            let time = m.mean_dot * z / s + 0.5 * m.variance_dot * curv;
            let adv = match advection {
                Advection::Linear(omega) => omega * (1.0 - q * z / s),
                Advection::Uniform(v) => -v * z / s,
            };
            (p * (time + adv - 0.5 * d * curv)).abs()
        })
        .fold(0.0, f64::max)
}

/// Residual of `g` in its own equation with coefficients from `source`.
pub fn fpe_residual(g: &GaussianDensity, source: &dyn CoefficientSource, q_grid: &[f64], t: f64) -> Result<f64> {
    let m = g.checked(t)?;
    let c = source.sample(t)?;
    let (adv, d) = match g.kind {
        DensityKind::ConditionalQv => (
            Advection::Uniform(response::drift_velocity(&g.params, t, g.q0, g.v0)),
            c.d1,
        ),
        _ => (Advection::Linear(c.omega), c.d_fpe),
    };
    Ok(residual_from_moments(&m, adv, d, q_grid))
}

/// `|<p(q | q0, v0)>_{v0} - p_thermal(q | q0)|` with the Maxwell average done
/// by an `n_quad`-point Gauss-Hermite rule.
pub fn maxwell_average_check(p: &PhysicalParams, mode: Mode, t: f64, q: f64, q0: f64, n_quad: usize) -> Result<f64> {
    let thermal = GaussianDensity::thermal(*p, mode, q0).density(q, t)?;
    let cond = GaussianDensity::conditional(*p, mode, q0, 0.0);
    let m = cond.checked(t)?;
    let chi_v = response::chi_v(p, t);
    let sd = (p.kt() / p.mass).sqrt();
    let avg = stats::normal_expectation(|v0| normal_pdf(q, m.mean + chi_v * v0, m.variance), 0.0, sd, n_quad);
    Ok((avg - thermal).abs())
}

/// Writes `q,p` rows.
pub fn write_density_csv<P: AsRef<Path>>(path: P, q_grid: &[f64], values: &[f64]) -> Result<()> {
    io::write_csv(
        path,
        &["q", "p"],
        q_grid.iter().zip(values).map(|(&q, &v)| vec![q, v]),
    )
}
