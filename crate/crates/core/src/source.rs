//! Coefficient providers for the density propagators: direct evaluation or
//! cubic Hermite interpolation of a precomputed table.

use crate::coefficients::{self, CoefficientTable, Mode};
use crate::error::{Error, Result};
use crate::model::PhysicalParams;
use crate::response;

/// Drift and diffusion at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourcePoint {
    pub omega: f64,
    pub d_fpe: f64,
    pub d1: f64,
}

pub trait CoefficientSource: Sync {
    fn params(&self) -> &PhysicalParams;

    fn mode(&self) -> Mode;

    /// Fails with `PoleAtChiQZero` on a drift pole, `PoleWindow` when an
    /// interpolation interval straddles one.
    fn sample(&self, t: f64) -> Result<SourcePoint>;

    /// Fails with `PoleWindow` if `[t0, t1]` contains a zero of `chi_q`.
    fn check_window(&self, t0: f64, t1: f64) -> Result<()> {
        match response::chi_q_zeros(self.params(), t1).into_iter().find(|&z| z >= t0) {
            Some(pole) => Err(Error::PoleWindow { t0, t1, pole }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AnalyticSource {
    pub params: PhysicalParams,
    pub mode: Mode,
}

impl AnalyticSource {
    pub fn new(params: PhysicalParams, mode: Mode) -> Self {
        Self { params, mode }
    }
}

impl CoefficientSource for AnalyticSource {
    fn params(&self) -> &PhysicalParams {
        &self.params
    }

    fn mode(&self) -> Mode {
        self.mode
    }

    fn sample(&self, t: f64) -> Result<SourcePoint> {
        let pt = coefficients::evaluate(&self.params, t, self.mode)?;
        if pt.pole {
            return Err(Error::PoleAtChiQZero {
                t,
                pole: response::nearest_pole(&self.params, t).unwrap_or(t),
            });
        }
        Ok(SourcePoint {
            omega: pt.omega,
            d_fpe: pt.d_fpe,
            d1: pt.d1,
        })
    }
}

/// Node slope from the three-point nonuniform difference, one-sided three
/// points at the ends.
fn slope(t: &[f64], y: &[f64], i: usize) -> f64 {
    let n = t.len();
    match n {
        1 => return 0.0,
        2 => return (y[1] - y[0]) / (t[1] - t[0]),
        _ => {}
    }
    let three = |a: usize, b: usize, c: usize, at: f64| {
        // derivative of the quadratic through nodes a, b, c evaluated at `at`
        let (ta, tb, tc) = (t[a], t[b], t[c]);
        y[a] * (2.0 * at - tb - tc) / ((ta - tb) * (ta - tc))
            + y[b] * (2.0 * at - ta - tc) / ((tb - ta) * (tb - tc))
            + y[c] * (2.0 * at - ta - tb) / ((tc - ta) * (tc - tb))
    };
    if i == 0 {
        three(0, 1, 2, t[0])
    } else if i == n - 1 {
        three(n - 3, n - 2, n - 1, t[n - 1])
    } else {
        three(i - 1, i, i + 1, t[i])
    }
}

fn hermite(t: &[f64], y: &[f64], i: usize, x: f64) -> f64 {
    let h = t[i + 1] - t[i];
    let s = (x - t[i]) / h;
    let (s2, s3) = (s * s, s * s * s);
    let m0 = slope(t, y, i) * h;
    let m1 = slope(t, y, i + 1) * h;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y[i] + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y[i + 1]
        + (s3 - s2) * m1
}

impl CoefficientSource for CoefficientTable {
    fn params(&self) -> &PhysicalParams {
        &self.params
    }

    fn mode(&self) -> Mode {
        self.mode
    }

    fn sample(&self, t: f64) -> Result<SourcePoint> {
        let n = self.t.len();
        let (t0, t1) = (self.t[0], self.t[n - 1]);
        if !(t0..=t1).contains(&t) {
            return Err(Error::InvalidInput(format!(
                "time {t} outside the table span [{t0}, {t1}]"
            )));
        }
        let exact = self.t.binary_search_by(|x| x.total_cmp(&t));
        if let Ok(i) = exact {
            if !self.valid[i] {
                return Err(Error::PoleAtChiQZero { t, pole: t });
            }
            return Ok(SourcePoint {
                omega: self.omega[i],
                d_fpe: self.d_fpe[i],
                d1: self.d1[i],
            });
        }
        let i = exact.unwrap_err() - 1;
        // the Hermite stencil reaches one node beyond each end of the interval
        let lo = i.saturating_sub(1);
        let hi = (i + 2).min(n - 1);
        if let Some(&pole) = self.poles.iter().find(|&&z| z >= self.t[lo] && z <= self.t[hi]) {
            return Err(Error::PoleWindow {
                t0: self.t[lo],
                t1: self.t[hi],
                pole,
            });
        }
        Ok(SourcePoint {
            omega: hermite(&self.t, &self.omega, i, t),
            d_fpe: hermite(&self.t, &self.d_fpe, i, t),
            d1: hermite(&self.t, &self.d1, i, t),
        })
    }
}
