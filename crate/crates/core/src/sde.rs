//! Monte-Carlo simulators: the reduced first-order SDE
//! `dq = q Omega(t) dt + sqrt(D(t)) dB` and the underdamped Langevin
//! equation `M dv = -M gamma v dt - omega0^2 q dt + sqrt(2 k_B T gamma M) dB`.
//!
//! Every path owns a ChaCha8 stream keyed by `(seed, simulator)` and selected
//! by the path index, so results do not depend on the thread count.
//! Moments are reduced in path order with pairwise summation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{linear_grid, Mode};
use crate::error::{Error, Result};
use crate::io::{self, VERSION};
use crate::model::PhysicalParams;
use crate::propagator::GaussianDensity;
use crate::source::CoefficientSource;
use crate::special::sum::pairwise_sum;
use crate::stats;
use crate::validation::{Check, ValidationReport};

/// `|z|` bound used by [`equivalence_report`].
pub const Z_LIMIT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Simulator {
    Reduced,
    Langevin,
}

impl Simulator {
    fn tag(self) -> u64 {
        match self {
            Simulator::Reduced => 1,
            Simulator::Langevin => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "v0", rename_all = "kebab-case")]
pub enum InitialVelocity {
    Fixed { value: f64 },
    /// `v0 ~ Normal(0, k_B T / M)`.
    Thermal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    /// Recorded times; steps are shortened to land on them.
    pub output_times: Vec<f64>,
}

impl SimConfig {
    /// Records 101 equally spaced times including `0` and `t_final`.
    pub fn new(n_paths: usize, dt: f64, t_final: f64, seed: u64) -> Self {
        Self {
            n_paths,
            dt,
            t_final,
            seed,
            output_times: linear_grid(0.0, t_final, 101),
        }
    }

    pub fn with_output_times(mut self, times: Vec<f64>) -> Self {
        self.output_times = times;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 paths, got {}", self.n_paths)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidInput(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.output_times.is_empty() {
            return Err(Error::InvalidInput("no output times".into()));
        }
        if self.output_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("output times must be strictly increasing".into()));
        }
        if self.output_times.iter().any(|&t| !(0.0..=self.t_final).contains(&t)) {
            return Err(Error::InvalidInput("output times must lie in [0, t_final]".into()));
        }
        Ok(())
    }
}

/// `(t0, h, record index after the step)`.
type Step = (f64, f64, Option<usize>);

fn schedule(cfg: &SimConfig) -> (Vec<usize>, Vec<Step>) {
    let mut initial = Vec::new();
    let mut steps = Vec::new();
    let mut t = 0.0;
    for (j, &target) in cfg.output_times.iter().enumerate() {
        if target == 0.0 {
            initial.push(j);
            continue;
        }
        let start = t;
        let mut k = 0usize;
        while t < target {
            let next = start + (k + 1) as f64 * cfg.dt;
            let last = next >= target - 1e-9 * cfg.dt;
            let end = if last { target } else { next };
            steps.push((t, end - t, last.then_some(j)));
            t = end;
            k += 1;
        }
    }
    (initial, steps)
}

fn path_rng(seed: u64, sim: Simulator, path: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&sim.tag().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub version: String,
    pub simulator: Simulator,
    pub params: PhysicalParams,
    pub q0: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub se_mean: Vec<f64>,
    pub se_var: Vec<f64>,
    /// Positions indexed `[time][path]`.
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
    /// Langevin velocities indexed `[time][path]`.
    #[serde(skip)]
    pub velocities: Option<Vec<Vec<f64>>>,
}

struct Moments {
    mean: f64,
    var: f64,
    se_mean: f64,
    se_var: f64,
}

fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let d2: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&d2) / (n - 1.0);
    let d4: Vec<f64> = d2.iter().map(|x| x * x).collect();
    let m4 = pairwise_sum(&d4) / n;
    Moments {
        mean,
        var,
        se_mean: (var / n).sqrt(),
        se_var: ((m4 - var * var).max(0.0) / n).sqrt(),
    }
}

/// Transposes per-path rows into `[time][path]`.
fn by_time(rows: &[Vec<f64>], n_times: usize) -> Vec<Vec<f64>> {
    (0..n_times).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

fn assemble(
    simulator: Simulator,
    params: PhysicalParams,
    q0: f64,
    cfg: &SimConfig,
    samples: Vec<Vec<f64>>,
    velocities: Option<Vec<Vec<f64>>>,
) -> EnsembleStats {
    let m: Vec<Moments> = samples.iter().map(|s| moments(s)).collect();
    EnsembleStats {
        version: VERSION.to_string(),
        simulator,
        params,
        q0,
        n_paths: cfg.n_paths,
        dt: cfg.dt,
        seed: cfg.seed,
        t: cfg.output_times.clone(),
        mean: m.iter().map(|x| x.mean).collect(),
        variance: m.iter().map(|x| x.var).collect(),
        se_mean: m.iter().map(|x| x.se_mean).collect(),
        se_var: m.iter().map(|x| x.se_var).collect(),
        samples,
        velocities,
    }
}

fn first_non_finite(rows: &[Vec<f64>], times: &[f64]) -> Option<(usize, f64)> {
    rows.iter().enumerate().find_map(|(i, r)| {
        r.iter()
            .position(|v| !v.is_finite())
            .map(|j| (i, times[j]))
    })
}

/// Euler-Maruyama for the reduced SDE with coefficients at step midpoints.
/// Classical coefficients only.
pub fn simulate_reduced(source: &dyn CoefficientSource, q0: f64, cfg: &SimConfig) -> Result<EnsembleStats> {
    cfg.validate()?;
    if source.mode() != Mode::Classical {
        return Err(Error::InvalidInput(
            "the reduced SDE is only defined with classical coefficients".into(),
        ));
    }
    source.check_window(0.0, cfg.t_final)?;
    let (initial, steps) = schedule(cfg);
    let coeffs: Vec<(f64, f64)> = steps
        .iter()
        .map(|&(t0, h, _)| {
            let tm = t0 + 0.5 * h;
            let c = source.sample(tm)?;
            if !c.omega.is_finite() {
                return Err(Error::NonFiniteCoefficient { name: "omega", t: tm });
            }
            if !c.d_fpe.is_finite() {
                return Err(Error::NonFiniteCoefficient { name: "d_fpe", t: tm });
            }
            if c.d_fpe < 0.0 {
                return Err(Error::NegativeDiffusion { t: tm, value: c.d_fpe });
            }
            Ok((c.omega * h, (c.d_fpe * h).sqrt()))
        })
        .collect::<Result<_>>()?;
    let n_out = cfg.output_times.len();
    let rows: Vec<Vec<f64>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(cfg.seed, Simulator::Reduced, path);
            let mut out = vec![0.0; n_out];
            for &j in &initial {
                out[j] = q0;
            }
            let mut q = q0;
            for (&(_, _, rec), &(oh, sd)) in steps.iter().zip(&coeffs) {
                let z: f64 = rng.sample(StandardNormal);
                q += q * oh + sd * z;
                if let Some(j) = rec {
                    out[j] = q;
                }
            }
            out
        })
        .collect();
    if let Some((path, t)) = first_non_finite(&rows, &cfg.output_times) {
        return Err(Error::NonFiniteState { path, t });
    }
    let samples = by_time(&rows, n_out);
    Ok(assemble(Simulator::Reduced, *source.params(), q0, cfg, samples, None))
}

/// BAOAB splitting with an exact Ornstein-Uhlenbeck velocity substep.
pub fn simulate_langevin(p: &PhysicalParams, q0: f64, v0: InitialVelocity, cfg: &SimConfig) -> Result<EnsembleStats> {
    cfg.validate()?;
    let (initial, steps) = schedule(cfg);
    let k = p.rate();
    let thermal_sd = (p.kt() / p.mass).sqrt();
    // (h, e^{-gamma h}, OU noise sd) per step
    let sub: Vec<(f64, f64, f64)> = steps
        .iter()
        .map(|&(_, h, _)| {
            let c = (-p.gamma * h).exp();
            (h, c, thermal_sd * (-(-2.0 * p.gamma * h).exp_m1()).sqrt())
        })
        .collect();
    let n_out = cfg.output_times.len();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(cfg.seed, Simulator::Langevin, path);
            let mut v = match v0 {
                InitialVelocity::Fixed { value } => value,
                InitialVelocity::Thermal => thermal_sd * rng.sample::<f64, _>(StandardNormal),
            };
            let mut q = q0;
            let mut qs = vec![0.0; n_out];
            let mut vs = vec![0.0; n_out];
            for &j in &initial {
                qs[j] = q;
                vs[j] = v;
            }
            for (&(_, _, rec), &(h, c, s)) in steps.iter().zip(&sub) {
                v -= 0.5 * h * k * q;
                q += 0.5 * h * v;
                let z: f64 = rng.sample(StandardNormal);
                v = c * v + s * z;
                q += 0.5 * h * v;
                v -= 0.5 * h * k * q;
                if let Some(j) = rec {
                    qs[j] = q;
                    vs[j] = v;
                }
            }
            (qs, vs)
        })
        .collect();
    let (qrows, vrows): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    if let Some((path, t)) = first_non_finite(&qrows, &cfg.output_times)
        .or_else(|| first_non_finite(&vrows, &cfg.output_times))
    {
        return Err(Error::NonFiniteState { path, t });
    }
    let samples = by_time(&qrows, n_out);
    let velocities = by_time(&vrows, n_out);
    Ok(assemble(Simulator::Langevin, *p, q0, cfg, samples, Some(velocities)))
}

pub const STATS_COLUMNS: [&str; 5] = ["t", "mean", "var", "se_mean", "se_var"];

impl EnsembleStats {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.t.iter().position(|&x| x == t)
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        io::write_csv(
            path,
            &STATS_COLUMNS,
            (0..self.len()).map(|i| vec![self.t[i], self.mean[i], self.variance[i], self.se_mean[i], self.se_var[i]]),
        )
    }

    /// Little-endian `u64 n_paths`, `u64 n_times`, then `n_paths * n_times`
    /// doubles, row-major by path.
    pub fn write_raw<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        w.write_all(&(self.n_paths as u64).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for i in 0..self.n_paths {
            for s in &self.samples {
                w.write_all(&s[i].to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a dump written by [`EnsembleStats::write_raw`] as rows per path.
pub fn read_raw<P: AsRef<Path>>(path: P) -> Result<Vec<Vec<f64>>> {
    let mut r = BufReader::new(File::open(path.as_ref())?);
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n_paths = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let n_times = u64::from_le_bytes(word) as usize;
    let mut rows = Vec::with_capacity(n_paths);
    for _ in 0..n_paths {
        let mut row = Vec::with_capacity(n_times);
        for _ in 0..n_times {
            r.read_exact(&mut word)?;
            row.push(f64::from_le_bytes(word));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff.abs() <= 1e-12 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Per-time z-scores of means and variances between two ensembles and
/// against the closed-form Gaussian; passes iff every `|z| <= 4`.
pub fn equivalence_report(a: &EnsembleStats, b: &EnsembleStats, analytic: &GaussianDensity) -> Result<ValidationReport> {
    if a.t != b.t {
        return Err(Error::GridMismatch(format!(
            "ensembles record {} and {} times on different grids",
            a.len(),
            b.len()
        )));
    }
    let exact: Vec<(f64, f64)> = a
        .t
        .iter()
        .map(|&t| {
            if t == 0.0 {
                // the delta initial condition
                Ok((analytic.q0, analytic.initial_variance))
            } else {
                analytic.moments(t).map(|m| (m.mean, m.variance))
            }
        })
        .collect::<Result<_>>()?;
    let la = format!("{:?}", a.simulator).to_lowercase();
    let lb = format!("{:?}", b.simulator).to_lowercase();
    let n = a.len();
    let trace = |f: &dyn Fn(usize) -> f64| (0..n).map(|i| (a.t[i], f(i))).collect::<Vec<_>>();
    let mut r = ValidationReport::new("sde-equivalence");
    r.push(Check::worst_of(
        format!("mean_{la}_vs_{lb}"),
        trace(&|i| z_score(a.mean[i] - b.mean[i], a.se_mean[i].hypot(b.se_mean[i]))),
        Z_LIMIT,
    ));
    r.push(Check::worst_of(
        format!("var_{la}_vs_{lb}"),
        trace(&|i| z_score(a.variance[i] - b.variance[i], a.se_var[i].hypot(b.se_var[i]))),
        Z_LIMIT,
    ));
    for (s, label) in [(a, &la), (b, &lb)] {
        r.push(Check::worst_of(
            format!("mean_{label}_vs_analytic"),
            trace(&|i| z_score(s.mean[i] - exact[i].0, s.se_mean[i])),
            Z_LIMIT,
        ));
        r.push(Check::worst_of(
            format!("var_{label}_vs_analytic"),
            trace(&|i| z_score(s.variance[i] - exact[i].1, s.se_var[i])),
            Z_LIMIT,
        ));
    }
    Ok(r)
}

/// Two-sample KS statistic and its 5% threshold at each output time where
/// both ensembles carry samples.
pub fn ks_per_time(a: &EnsembleStats, b: &EnsembleStats) -> Result<Vec<(f64, f64, f64)>> {
    if a.t != b.t {
        return Err(Error::GridMismatch("KS comparison needs matching output times".into()));
    }
    Ok(a
        .t
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            (
                t,
                stats::ks_two_sample(&a.samples[i], &b.samples[i]),
                stats::ks_two_sample_threshold(a.n_paths, b.n_paths),
            )
        })
        .collect())
}
