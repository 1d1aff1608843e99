//! Finite-volume solver for the one-dimensional Fokker-Planck equation with
//! time-dependent coefficients, in the drift-velocity form
//! `p_t = -vbar p_q + (D1/2) p_qq` and the linear-drift form
//! `p_t = -Omega (q p)_q + (D/2) p_qq`.
//!
//! Cells of width `dq` are centred on the `n_q` grid points. Face fluxes are
//! `a (p_i + p_{i+1}) / 2 - (d/2) (p_{i+1} - p_i) / dq` and coefficients are
//! sampled at the step midpoint.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coefficients::Mode;
use crate::error::{Error, Result};
use crate::io::{self, VERSION};
use crate::model::PhysicalParams;
use crate::propagator::{DensityKind, GaussianDensity};
use crate::response;
use crate::source::{AnalyticSource, CoefficientSource};

/// Initial width in cells when none is given.
pub const DEFAULT_WIDTH_CELLS: f64 = 5.0;

/// Upper bound on `dt |Omega|`.
pub const MAX_DT_OMEGA: f64 = 0.1;

/// Cells below this value count as negative.
pub const NEGATIVE_TOL: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum Form {
    /// Evolves `p(q, t | q0, v0)`.
    DriftVelocity { v0: f64 },
    /// Evolves the velocity-averaged density.
    Adelman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Crank-Nicolson on the full central operator.
    #[default]
    CrankNicolson,
    /// Explicit first-order upwind advection followed by a backward-Euler
    /// diffusion step. Positivity preserving, first order in space.
    UpwindSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    ZeroFlux,
    Absorbing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub q0: f64,
    /// Standard deviation of the initial Gaussian; `5 dq` when absent.
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n_q: usize,
    pub dt: f64,
    pub scheme: Scheme,
    pub boundary: Boundary,
    pub init: InitialCondition,
    /// Grid half-width around `q0`; derived from the analytic variance when
    /// absent.
    pub half_width: Option<f64>,
    pub t_start: f64,
}

impl SolverConfig {
    pub fn new(n_q: usize, dt: f64, q0: f64) -> Self {
        Self {
            n_q,
            dt,
            scheme: Scheme::default(),
            boundary: Boundary::default(),
            init: InitialCondition { q0, width: None },
            half_width: None,
            t_start: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_q < 3 {
            return Err(Error::InvalidInput(format!("n_q must be at least 3, got {}", self.n_q)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.init.q0.is_finite() {
            return Err(Error::InvalidInput("q0 must be finite".into()));
        }
        if let Some(w) = self.init.width {
            if !(w > 0.0) {
                return Err(Error::InvalidInput(format!("initial width must be positive, got {w}")));
            }
        }
        if let Some(h) = self.half_width {
            if !(h > 0.0) {
                return Err(Error::InvalidInput(format!("half width must be positive, got {h}")));
            }
        }
        if !(self.t_start >= 0.0) {
            return Err(Error::InvalidInput("t_start must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub q: Vec<f64>,
    pub values: Vec<f64>,
    pub t: f64,
    pub dq: f64,
}

impl DensityField {
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dq
    }

    pub fn mean(&self) -> f64 {
        self.q.iter().zip(&self.values).map(|(q, p)| q * p).sum::<f64>() * self.dq / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.q
            .iter()
            .zip(&self.values)
            .map(|(q, p)| (q - m) * (q - m) * p)
            .sum::<f64>()
            * self.dq
            / self.mass()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(max |p - exact|, max exact)` against a closed-form density.
    pub fn linf_error(&self, exact: &GaussianDensity) -> Result<(f64, f64)> {
        let e = exact.density_grid(&self.q, self.t)?;
        let err = self
            .values
            .iter()
            .zip(&e)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok((err, e.iter().copied().fold(0.0, f64::max)))
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P, exact: Option<&[f64]>) -> Result<()> {
        match exact {
            None => io::write_csv(
                path,
                &["q", "p"],
                self.q.iter().zip(&self.values).map(|(&q, &p)| vec![q, p]),
            ),
            Some(e) => io::write_csv(
                path,
                &["q", "p", "p_exact"],
                (0..self.q.len()).map(|i| vec![self.q[i], self.values[i], e[i]]),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: usize,
    /// Largest `|mass - 1|` seen after any step.
    pub max_mass_error: f64,
    pub min_value: f64,
    /// Cells below `NEGATIVE_TOL` in the final field. Values are never
    /// clipped.
    pub negative_cells: usize,
    pub max_peclet: f64,
    pub max_dt_omega: f64,
}

/// Advection speed at `q` and diffusion at the step midpoint.
#[derive(Debug, Clone, Copy)]
struct StepCoefficients {
    linear: bool,
    a: f64,
    d: f64,
}

impl StepCoefficients {
    fn speed(&self, q: f64) -> f64 {
        if self.linear {
            self.a * q
        } else {
            self.a
        }
    }
}

fn step_coefficients(
    source: &dyn CoefficientSource,
    form: Form,
    q0: f64,
    t0: f64,
    dt: f64,
) -> Result<StepCoefficients> {
    let tm = t0 + 0.5 * dt;
    let (linear, a, d) = match form {
        Form::Adelman => {
            source.check_window(t0, t0 + dt)?;
            let c = source.sample(tm)?;
            if dt * c.omega.abs() > MAX_DT_OMEGA {
                return Err(Error::CflViolation(format!(
                    "dt |Omega| = {} exceeds {MAX_DT_OMEGA} at t = {tm}",
                    dt * c.omega.abs()
                )));
            }
            (true, c.omega, c.d_fpe)
        }
        Form::DriftVelocity { v0 } => {
            let c = source.sample(tm)?;
            (false, response::drift_velocity(source.params(), tm, q0, v0), c.d1)
        }
    };
    if !a.is_finite() {
        return Err(Error::NonFiniteCoefficient { name: "drift", t: tm });
    }
    if !d.is_finite() {
        return Err(Error::NonFiniteCoefficient { name: "diffusion", t: tm });
    }
    if d < 0.0 {
        return Err(Error::NegativeDiffusion { t: tm, value: d });
    }
    Ok(StepCoefficients { linear, a, d })
}

/// Solves `sub x_{i-1} + diag x_i + sup x_{i+1} = rhs` in place.
fn thomas(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
}

/// Tridiagonal operator `L` with `dp/dt = L p`; `adv` toggles the central
/// advection part.
fn operator(q: &[f64], dq: f64, c: &StepCoefficients, boundary: Boundary, adv: bool) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = q.len();
    let r = 0.5 * c.d / (dq * dq);
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let face = |i: usize| {
        if adv {
            c.speed(q[i] + 0.5 * dq) / (2.0 * dq)
        } else {
            0.0
        }
    };
    for i in 0..n - 1 {
        // face between i and i + 1
        let a = face(i);
        diag[i] += -a - r;
        sup[i] += -a + r;
        diag[i + 1] += a - r;
        sub[i + 1] += a + r;
    }
    if boundary == Boundary::Absorbing {
        let (al, ar) = if adv {
            (c.speed(q[0] - 0.5 * dq) / (2.0 * dq), face(n - 1))
        } else {
            (0.0, 0.0)
        };
        diag[0] += al - r;
        diag[n - 1] += -ar - r;
    }
    (sub, diag, sup)
}

fn apply(sub: &[f64], diag: &[f64], sup: &[f64], p: &[f64], scale: f64) -> Vec<f64> {
    let n = p.len();
    (0..n)
        .map(|i| {
            let mut v = diag[i] * p[i];
            if i > 0 {
                v += sub[i] * p[i - 1];
            }
            if i + 1 < n {
                v += sup[i] * p[i + 1];
            }
            p[i] + scale * v
        })
        .collect()
}

fn implicit_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: Vec<f64>, scale: f64) -> Vec<f64> {
    let s: Vec<f64> = sub.iter().map(|x| -scale * x).collect();
    let mut d: Vec<f64> = diag.iter().map(|x| 1.0 - scale * x).collect();
    let u: Vec<f64> = sup.iter().map(|x| -scale * x).collect();
    let mut x = rhs;
    thomas(&s, &mut d, &u, &mut x);
    x
}

fn upwind(field: &DensityField, c: &StepCoefficients, boundary: Boundary, dt: f64) -> Result<Vec<f64>> {
    let (q, p, dq) = (&field.q, &field.values, field.dq);
    let n = q.len();
    let mut flux = vec![0.0; n + 1];
    for (f, slot) in flux.iter_mut().enumerate() {
        let qf = q[0] + (f as f64 - 0.5) * dq;
        let a = c.speed(qf);
        if a.abs() * dt > dq {
            return Err(Error::CflViolation(format!(
                "upwind Courant number {} exceeds 1",
                a.abs() * dt / dq
            )));
        }
        let outer = f == 0 || f == n;
        if outer && boundary == Boundary::ZeroFlux {
            continue;
        }
        let left = if f == 0 { 0.0 } else { p[f - 1] };
        let right = if f == n { 0.0 } else { p[f] };
        *slot = if a >= 0.0 { a * left } else { a * right };
    }
    Ok((0..n).map(|i| p[i] - dt / dq * (flux[i + 1] - flux[i])).collect())
}

fn advance(field: &DensityField, c: &StepCoefficients, scheme: Scheme, boundary: Boundary, dt: f64) -> Result<Vec<f64>> {
    match scheme {
        Scheme::CrankNicolson => {
            let (sub, diag, sup) = operator(&field.q, field.dq, c, boundary, true);
            let rhs = apply(&sub, &diag, &sup, &field.values, 0.5 * dt);
            Ok(implicit_solve(&sub, &diag, &sup, rhs, 0.5 * dt))
        }
        Scheme::UpwindSplit => {
            let star = upwind(field, c, boundary, dt)?;
            let (sub, diag, sup) = operator(&field.q, field.dq, c, boundary, false);
            Ok(implicit_solve(&sub, &diag, &sup, star, dt))
        }
    }
}

fn peclet(field: &DensityField, c: &StepCoefficients) -> f64 {
    let vmax = c.speed(field.q[0]).abs().max(c.speed(*field.q.last().unwrap()).abs());
    if vmax == 0.0 {
        0.0
    } else if c.d == 0.0 {
        f64::INFINITY
    } else {
        vmax * field.dq / c.d
    }
}

/// One step of length `dt` (or `cfg.dt` via [`step`]).
pub fn step_by(field: &DensityField, source: &dyn CoefficientSource, form: Form, cfg: &SolverConfig, dt: f64) -> Result<DensityField> {
    let c = step_coefficients(source, form, cfg.init.q0, field.t, dt)?;
    let values = advance(field, &c, cfg.scheme, cfg.boundary, dt)?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState {
            path: i,
            t: field.t + dt,
        });
    }
    Ok(DensityField {
        q: field.q.clone(),
        values,
        t: field.t + dt,
        dq: field.dq,
    })
}

pub fn step(field: &DensityField, source: &dyn CoefficientSource, form: Form, cfg: &SolverConfig) -> Result<DensityField> {
    step_by(field, source, form, cfg, cfg.dt)
}

/// The closed-form density matching `form` and the widened initial condition.
pub fn oracle(p: &PhysicalParams, mode: Mode, form: Form, q0: f64, width: f64) -> GaussianDensity {
    let g = match form {
        Form::DriftVelocity { v0 } => GaussianDensity::conditional(*p, mode, q0, v0),
        Form::Adelman => GaussianDensity::thermal(*p, mode, q0),
    };
    g.with_initial_variance(width * width)
}

/// Half-width `8 sqrt(max sigma) + max(|q0|, max |mean - q0|)`, before the
/// initial width is added.
fn base_half_width(g: &GaussianDensity, t0: f64, t1: f64) -> Result<f64> {
    let bare = GaussianDensity {
        initial_variance: 0.0,
        ..*g
    };
    let n = 200;
    let mut var_max: f64 = 0.0;
    let mut shift: f64 = g.q0.abs();
    for i in 0..=n {
        let t = t0 + (t1 - t0) * i as f64 / n as f64;
        let m = bare.moments(t)?;
        var_max = var_max.max(m.variance);
        shift = shift.max((m.mean - g.q0).abs());
    }
    Ok(8.0 * var_max.sqrt() + shift)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub form: Form,
    pub config: SolverConfig,
    pub width: f64,
    pub snapshots: Vec<DensityField>,
    pub diagnostics: Diagnostics,
}

/// Builds the grid and the initial field.
pub fn initial_field(source: &dyn CoefficientSource, form: Form, t_final: f64, cfg: &SolverConfig) -> Result<(DensityField, f64)> {
    cfg.validate()?;
    let q0 = cfg.init.q0;
    let n = cfg.n_q;
    let cells = (n - 1) as f64;
    let half = match (cfg.half_width, cfg.init.width) {
        (Some(h), _) => h,
        (None, w) => {
            let g = oracle(source.params(), source.mode(), form, q0, 0.0);
            let base = base_half_width(&g, cfg.t_start, t_final)?;
            match w {
                Some(w) => base + 8.0 * w,
                // 8 s0 = 40 dq = 80 W / (n_q - 1)
                None => {
                    let f = 1.0 - 8.0 * DEFAULT_WIDTH_CELLS * 2.0 / cells;
                    if f <= 0.0 {
                        return Err(Error::InvalidInput(format!("n_q = {n} too small for the default initial width")));
                    }
                    base / f
                }
            }
        }
    };
    let dq = 2.0 * half / cells;
    let width = cfg.init.width.unwrap_or(DEFAULT_WIDTH_CELLS * dq);
    let q: Vec<f64> = (0..n).map(|i| q0 - half + dq * i as f64).collect();
    let g = oracle(source.params(), source.mode(), form, q0, width);
    let mut values = g.density_grid(&q, cfg.t_start)?;
    let mass = values.iter().sum::<f64>() * dq;
    values.iter_mut().for_each(|v| *v /= mass);
    Ok((
        DensityField {
            q,
            values,
            t: cfg.t_start,
            dq,
        },
        width,
    ))
}

/// Runs from `cfg.t_start` to `t_final`, recording a snapshot at every
/// requested time (and at `t_final`). Steps are shortened to land on them.
pub fn solve_with(
    source: &dyn CoefficientSource,
    form: Form,
    t_final: f64,
    snapshot_times: &[f64],
    cfg: &SolverConfig,
) -> Result<Solution> {
    if !(t_final > cfg.t_start) {
        return Err(Error::InvalidInput(format!(
            "t_final = {t_final} must exceed t_start = {}",
            cfg.t_start
        )));
    }
    let mut targets: Vec<f64> = snapshot_times
        .iter()
        .copied()
        .filter(|&s| s > cfg.t_start && s < t_final)
        .collect();
    if snapshot_times.iter().any(|s| !s.is_finite() || *s < cfg.t_start || *s > t_final) {
        return Err(Error::InvalidInput("snapshot times must lie in [t_start, t_final]".into()));
    }
    if form == Form::Adelman {
        source.check_window(cfg.t_start, t_final)?;
    }
    targets.push(t_final);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let (mut field, width) = initial_field(source, form, t_final, cfg)?;
    let mut snapshots = Vec::new();
    if snapshot_times.contains(&cfg.t_start) {
        snapshots.push(field.clone());
    }
    let mut diag = Diagnostics {
        min_value: field.min(),
        ..Default::default()
    };
    for &target in &targets {
        let start = field.t;
        let mut k = 0usize;
        let mut t = start;
        while t < target {
            // times are counted from the segment start so rounding never
            // leaves a sliver step before the target
            let next = start + (k + 1) as f64 * cfg.dt;
            let last = next >= target - 1e-9 * cfg.dt;
            let h = if last { target - t } else { next - t };
            let c = step_coefficients(source, form, cfg.init.q0, t, h)?;
            diag.max_peclet = diag.max_peclet.max(peclet(&field, &c));
            if c.linear {
                diag.max_dt_omega = diag.max_dt_omega.max(h * c.a.abs());
            }
            let values = advance(&field, &c, cfg.scheme, cfg.boundary, h)?;
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { path: i, t: t + h });
            }
            field.values = values;
            k += 1;
            t = if last { target } else { next };
            field.t = t;
            diag.steps += 1;
            if cfg.boundary == Boundary::ZeroFlux {
                diag.max_mass_error = diag.max_mass_error.max((field.mass() - 1.0).abs());
            }
            diag.min_value = diag.min_value.min(field.min());
        }
        snapshots.push(field.clone());
    }
    diag.negative_cells = field.values.iter().filter(|&&v| v < NEGATIVE_TOL).count();
    Ok(Solution {
        form,
        config: *cfg,
        width,
        snapshots,
        diagnostics: diag,
    })
}

pub fn solve(
    p: &PhysicalParams,
    form: Form,
    mode: Mode,
    t_final: f64,
    snapshot_times: &[f64],
    cfg: &SolverConfig,
) -> Result<Solution> {
    solve_with(&AnalyticSource::new(*p, mode), form, t_final, snapshot_times, cfg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub t: f64,
    pub file: String,
    pub mass: f64,
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub linf_error: Option<f64>,
    pub linf_relative: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub params: PhysicalParams,
    pub mode: Mode,
    pub form: Form,
    pub config: SolverConfig,
    pub initial_width: f64,
    pub oracle: Option<DensityKind>,
    pub snapshots: Vec<SnapshotRecord>,
    pub diagnostics: Diagnostics,
}

impl Solution {
    pub fn oracle(&self, p: &PhysicalParams, mode: Mode) -> GaussianDensity {
        oracle(p, mode, self.form, self.config.init.q0, self.width)
    }

    /// Writes `<stem>_<k>.csv` per snapshot and `<stem>.json`. With
    /// `compare`, each CSV gains a `p_exact` column and the manifest records
    /// L-infinity errors.
    pub fn write(&self, dir: &Path, stem: &str, p: &PhysicalParams, mode: Mode, compare: bool) -> Result<RunManifest> {
        let g = self.oracle(p, mode);
        let mut records = Vec::with_capacity(self.snapshots.len());
        for (k, s) in self.snapshots.iter().enumerate() {
            let file = format!("{stem}_{k:04}.csv");
            let exact = if compare { Some(g.density_grid(&s.q, s.t)?) } else { None };
            s.write_csv(dir.join(&file), exact.as_deref())?;
            let (err, rel) = match &exact {
                Some(e) => {
                    let err = s.values.iter().zip(e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    let peak = e.iter().copied().fold(0.0, f64::max);
                    (Some(err), Some(err / peak))
                }
                None => (None, None),
            };
            records.push(SnapshotRecord {
                t: s.t,
                file,
                mass: s.mass(),
                mean: s.mean(),
                variance: s.variance(),
                min: s.min(),
                linf_error: err,
                linf_relative: rel,
            });
        }
        let manifest = RunManifest {
            version: VERSION.to_string(),
            params: *p,
            mode,
            form: self.form,
            config: self.config,
            initial_width: self.width,
            oracle: compare.then_some(g.kind),
            snapshots: records,
            diagnostics: self.diagnostics,
        };
        io::write_json(dir.join(format!("{stem}.json")), &manifest)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::SourcePoint;

    fn overdamped() -> PhysicalParams {
        PhysicalParams::reduced(1.0, 1.0, 0.16, 1.0, 0.0).unwrap()
    }

    struct Constant {
        p: PhysicalParams,
        omega: f64,
        d: f64,
    }

    impl CoefficientSource for Constant {
        fn params(&self) -> &PhysicalParams {
            &self.p
        }
        fn mode(&self) -> Mode {
            Mode::Classical
        }
        fn sample(&self, _t: f64) -> Result<SourcePoint> {
            Ok(SourcePoint {
                omega: self.omega,
                d_fpe: self.d,
                d1: self.d,
            })
        }
        fn check_window(&self, _t0: f64, _t1: f64) -> Result<()> {
            Ok(())
        }
    }

    #[test]
    fn heat_kernel() {
        let src = Constant {
            p: overdamped(),
            omega: 0.0,
            d: 2.0,
        };
        let t = 50.0;
        let mut cfg = SolverConfig::new(2001, 0.01, 0.0);
        let s0: f64 = 0.5;
        cfg.init.width = Some(s0);
        cfg.half_width = Some(8.0 * (s0 * s0 + 2.0 * t).sqrt());
        let sol = solve_with(&src, Form::Adelman, t, &[], &cfg).unwrap();
        let f = sol.snapshots.last().unwrap();
        let var = s0 * s0 + 2.0 * t;
        let err = f
            .q
            .iter()
            .zip(&f.values)
            .map(|(&q, &v)| (v - crate::propagator::normal_pdf(q, 0.0, var)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err}");
        assert!(sol.diagnostics.max_mass_error < 1e-12);
    }

    #[test]
    fn snapshots_land_exactly() {
        let p = overdamped();
        let cfg = SolverConfig::new(201, 0.03, 1.0);
        let sol = solve(&p, Form::Adelman, Mode::Classical, 1.0, &[0.0, 0.1, 0.55], &cfg).unwrap();
        let ts: Vec<f64> = sol.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0.0, 0.1, 0.55, 1.0]);
    }

    #[test]
    fn adelman_matches_closed_form() {
        let p = overdamped();
        let cfg = SolverConfig::new(801, 1e-3, 1.0);
        let sol = solve(&p, Form::Adelman, Mode::Classical, 2.0, &[], &cfg).unwrap();
        let g = sol.oracle(&p, Mode::Classical);
        let (err, peak) = sol.snapshots[0].linf_error(&g).unwrap();
        assert!(err <= 1e-3 * peak, "{}", err / peak);
        assert!(sol.diagnostics.max_mass_error <= 1e-8);
        assert_eq!(sol.diagnostics.negative_cells, 0);
    }

    #[test]
    fn drift_form_matches_conditional() {
        let p = overdamped();
        let cfg = SolverConfig::new(801, 1e-3, 1.0);
        let sol = solve(&p, Form::DriftVelocity { v0: 0.5 }, Mode::Classical, 2.0, &[], &cfg).unwrap();
        let g = sol.oracle(&p, Mode::Classical);
        assert_eq!(g.kind, DensityKind::ConditionalQv);
        let f = &sol.snapshots[0];
        let (err, peak) = f.linf_error(&g).unwrap();
        assert!(err <= 1e-3 * peak, "{}", err / peak);
        let m = g.moments(2.0).unwrap();
        assert!((f.mean() - m.mean).abs() < 1e-6);
        assert!((f.variance() - m.variance).abs() < 1e-3 * m.variance);
    }

    #[test]
    fn upwind_variant_stays_positive() {
        let p = overdamped();
        let mut cfg = SolverConfig::new(401, 1e-3, 1.0);
        cfg.scheme = Scheme::UpwindSplit;
        let sol = solve(&p, Form::DriftVelocity { v0: 2.0 }, Mode::Classical, 1.0, &[], &cfg).unwrap();
        assert!(sol.diagnostics.min_value >= 0.0);
        assert!(sol.diagnostics.max_mass_error < 1e-12);
        let g = sol.oracle(&p, Mode::Classical);
        let (err, peak) = sol.snapshots[0].linf_error(&g).unwrap();
        assert!(err <= 0.1 * peak, "{}", err / peak);
    }

    #[test]
    fn absorbing_boundary_loses_mass() {
        let src = Constant {
            p: overdamped(),
            omega: 0.0,
            d: 2.0,
        };
        let mut cfg = SolverConfig::new(201, 0.01, 0.0);
        cfg.boundary = Boundary::Absorbing;
        cfg.init.width = Some(0.5);
        cfg.half_width = Some(2.0);
        let sol = solve_with(&src, Form::Adelman, 1.0, &[], &cfg).unwrap();
        let m = sol.snapshots[0].mass();
        assert!(m < 0.9 && m > 0.0, "{m}");
    }

    #[test]
    fn errors_are_reported() {
        let p = overdamped();
        let src = AnalyticSource::new(p, Mode::Classical);
        let cfg = SolverConfig::new(201, 1.0, 1.0);
        // |Omega| reaches 0.18 on [0, 5]
        assert!(matches!(
            solve_with(&src, Form::Adelman, 5.0, &[], &cfg),
            Err(Error::CflViolation(_))
        ));
        let neg = Constant {
            p,
            omega: 0.0,
            d: -1.0,
        };
        let mut cfg = SolverConfig::new(201, 0.01, 0.0);
        cfg.half_width = Some(3.0);
        cfg.init.width = Some(0.5);
        assert!(matches!(
            solve_with(&neg, Form::Adelman, 1.0, &[], &cfg),
            Err(Error::NegativeDiffusion { .. })
        ));
        let under = PhysicalParams::reduced(1.0, 0.2, 4.0, 1.0, 0.0).unwrap();
        let pole = response::chi_q_zeros(&under, 5.0)[0];
        let cfg = SolverConfig::new(201, 1e-3, 1.0);
        assert!(matches!(
            solve(&under, Form::Adelman, Mode::Classical, pole + 0.1, &[], &cfg),
            Err(Error::PoleWindow { .. })
        ));
        // the conditional form has no poles
        assert!(solve(&under, Form::DriftVelocity { v0: 0.0 }, Mode::Classical, pole + 0.1, &[], &cfg).is_ok());
        assert!(matches!(
            solve(&p, Form::Adelman, Mode::Classical, 1.0, &[], &SolverConfig::new(2, 0.1, 0.0)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn manifest_written() {
        let p = overdamped();
        let cfg = SolverConfig::new(101, 0.01, 1.0);
        let sol = solve(&p, Form::Adelman, Mode::Classical, 0.5, &[0.25], &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = sol.write(dir.path(), "run", &p, Mode::Classical, true).unwrap();
        assert_eq!(m.snapshots.len(), 2);
        assert!(m.snapshots[1].linf_relative.unwrap() < 0.05);
        let (h, rows) = io::read_csv(dir.path().join("run_0001.csv")).unwrap();
        assert_eq!(h, vec!["q", "p", "p_exact"]);
        assert_eq!(rows.len(), 101);
        let text = std::fs::read_to_string(dir.path().join("run.json")).unwrap();
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["form"]["form"], "adelman");
    }
}
