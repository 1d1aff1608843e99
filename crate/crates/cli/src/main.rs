//! `qbm`: coefficient tables, density propagation, ensemble simulation and
//! the consistency suites for a damped oscillator coupled to an Ohmic bath.
//!
//! Exit codes: 0 success, 1 bad input or i/o, 2 numerical failure or a
//! failed validation check.

mod config;
mod plot;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};
use serde_json::{json, Map, Value};

use qbm_core::coefficients::{self, build_table, linear_grid, Mode, QuantumOptions};
use qbm_core::fpe::{self, Boundary, Form, Scheme, SolverConfig};
use qbm_core::propagator::GaussianDensity;
use qbm_core::sde::{self, InitialVelocity, SimConfig};
use qbm_core::stats;
use qbm_core::suite::{self, SuiteOptions};
use qbm_core::validation::{Check, ValidationReport};
use qbm_core::{Error, PhysicalParams, RawParams, UnitSystem};

#[derive(Parser)]
#[command(name = "qbm", version, about = "Quantum Brownian motion in a harmonic well: coefficients, densities, ensembles")]
struct Cli {
    /// Worker threads; defaults to all available cores
    #[arg(long, global = true, env = "QBM_THREADS")]
    threads: Option<usize>,
    /// Flat `key = value` file (keys are flag names); command-line flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate drift and diffusion coefficients on a time grid
    Coeffs(CoeffsArgs),
    /// Solve the Fokker-Planck equation for the position density
    Fpe(FpeArgs),
    /// Simulate path ensembles (reduced SDE and/or full Langevin)
    Sde(SdeArgs),
    /// Run the consistency suites
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Units {
    Reduced,
    Si,
}

/// Parameters default to the overdamped benchmark (M = 1, gamma = 1,
/// omega0^2 = 0.16, T = 1). `--hbar` has no default in quantum mode.
#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ParamArgs {
    #[arg(long, allow_negative_numbers = true)]
    mass: Option<f64>,
    /// Friction rate
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Potential curvature, V = omega0_sq q^2 / 2
    #[arg(long, allow_negative_numbers = true)]
    omega0_sq: Option<f64>,
    /// Bath temperature
    #[arg(long, allow_negative_numbers = true)]
    temp: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    hbar: Option<f64>,
    #[arg(long, value_enum)]
    units: Option<Units>,
}

impl ParamArgs {
    fn physical(&mut self, quantum: bool) -> anyhow::Result<PhysicalParams> {
        let mass = *self.mass.get_or_insert(1.0);
        let gamma = *self.gamma.get_or_insert(1.0);
        let omega0_sq = *self.omega0_sq.get_or_insert(0.16);
        let temperature = *self.temp.get_or_insert(1.0);
        let hbar = match (quantum, self.hbar) {
            (_, Some(h)) => h,
            (true, None) => return Err(input("missing required flag --hbar (needed with --quantum)")),
            (false, None) => 0.0,
        };
        let units = match *self.units.get_or_insert(Units::Reduced) {
            Units::Reduced => UnitSystem::Reduced,
            Units::Si => UnitSystem::Si,
        };
        let raw = RawParams {
            mass,
            gamma,
            omega0_sq,
            temperature,
            hbar,
        };
        Ok(PhysicalParams::derive(raw, units)?)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ModeArgs {
    /// Classical coefficients (the default)
    #[arg(long, conflicts_with = "quantum")]
    classical: bool,
    /// Quantum coefficients; requires --hbar
    #[arg(long)]
    quantum: bool,
    /// Matsubara modes kept (quantum)
    #[arg(long)]
    n_max: Option<usize>,
    /// Series and quadrature tolerance (quantum)
    #[arg(long)]
    tol: Option<f64>,
}

impl ModeArgs {
    fn resolve(&mut self) -> Mode {
        self.classical = false;
        if !self.quantum {
            return Mode::Classical;
        }
        let d = QuantumOptions::default();
        Mode::Quantum(QuantumOptions {
            n_max: *self.n_max.get_or_insert(d.n_max),
            tol: *self.tol.get_or_insert(d.tol),
        })
    }
}

/// Comma-separated times.
#[derive(Debug, Clone, PartialEq)]
struct TimeList(Vec<f64>);

impl FromStr for TimeList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .filter(|x| !x.trim().is_empty())
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad time {x:?}: {e}")))
            .collect::<Result<_, _>>()
            .map(TimeList)
    }
}

impl Serialize for TimeList {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum V0Arg {
    Thermal,
    Fixed(f64),
}

impl FromStr for V0Arg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "thermal" {
            return Ok(V0Arg::Thermal);
        }
        s.parse().map(V0Arg::Fixed).map_err(|_| format!("expected a number or `thermal`, got {s:?}"))
    }
}

impl fmt::Display for V0Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            V0Arg::Thermal => write!(f, "thermal"),
            V0Arg::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for V0Arg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct CoeffsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    #[serde(flatten)]
    mode: ModeArgs,
    /// First grid time; defaults to 0 (classical) or the smallest supported time (quantum)
    #[arg(long)]
    t_min: Option<f64>,
    /// Last grid time [default: 10 / max(gamma, omega0)]
    #[arg(long)]
    t_max: Option<f64>,
    /// Number of grid points [default: 200]
    #[arg(long)]
    n: Option<usize>,
    /// Output directory [default: qbm-out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write validation.json with the table identity checks
    #[arg(long)]
    validate: bool,
    /// Also write a matplotlib script
    #[arg(long)]
    plot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FormArg {
    Adelman,
    Drift,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SchemeArg {
    /// Crank-Nicolson
    Cn,
    /// Upwind advection with implicit diffusion (positivity preserving)
    Upwind,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum BoundaryArg {
    ZeroFlux,
    Absorbing,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct FpeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    #[serde(flatten)]
    mode: ModeArgs,
    /// Velocity-averaged (adelman) or fixed initial velocity (drift)
    #[arg(long, value_enum)]
    form: Option<FormArg>,
    #[arg(long, allow_negative_numbers = true)]
    q0: Option<f64>,
    /// Initial velocity for the drift form [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    v0: Option<f64>,
    /// Grid points [default: 2001]
    #[arg(long)]
    n_q: Option<usize>,
    /// Time step [default: 1e-3 / max(gamma, omega0)]
    #[arg(long)]
    dt: Option<f64>,
    /// [default: 2 / max(gamma, omega0)]
    #[arg(long)]
    t_final: Option<f64>,
    /// Extra snapshot times, comma separated; t_final is always included
    #[arg(long)]
    snapshots: Option<TimeList>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    /// Initial Gaussian width [default: 5 grid cells]
    #[arg(long)]
    width: Option<f64>,
    /// Domain half-width [default: sized from the variance]
    #[arg(long)]
    half_width: Option<f64>,
    /// Start time [default: 0 classical, 1 / max(gamma, omega0) quantum]
    #[arg(long)]
    t_start: Option<f64>,
    /// Coefficient table rows used to drive quantum runs [default: 401]
    #[arg(long)]
    table_n: Option<usize>,
    /// Add the exact density to each snapshot and L-infinity errors to the manifest
    #[arg(long)]
    compare_analytic: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SimArg {
    Reduced,
    Langevin,
    Both,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct SdeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum)]
    simulator: Option<SimArg>,
    #[arg(long, allow_negative_numbers = true)]
    q0: Option<f64>,
    /// Initial velocity for Langevin paths: a number or `thermal` [default: thermal]
    #[arg(long, allow_negative_numbers = true)]
    v0: Option<V0Arg>,
    /// [default: 10000]
    #[arg(long)]
    paths: Option<usize>,
    /// [default: 1e-3 / max(gamma, omega0)]
    #[arg(long)]
    dt: Option<f64>,
    /// [default: 5 / max(gamma, omega0)]
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of equally spaced output times including 0 [default: 101]
    #[arg(long)]
    outputs: Option<usize>,
    /// Dump all positions to `sde_<simulator>.bin`
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SuiteArg {
    Classical,
    Quantum,
    All,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ValidateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum)]
    suite: Option<SuiteArg>,
    #[arg(long, allow_negative_numbers = true)]
    q0: Option<f64>,
    /// Paths for the ensemble checks [default: 100000]
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn input(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidInput(msg.into()).into()
}

/// `1 / max(gamma, omega0)`, the unit for default times.
fn time_scale(p: &PhysicalParams) -> f64 {
    1.0 / p.gamma.max(p.rate().sqrt())
}

fn out_dir(out: &mut Option<PathBuf>) -> anyhow::Result<PathBuf> {
    let dir = out.get_or_insert_with(|| PathBuf::from("qbm-out")).clone();
    std::fs::create_dir_all(&dir)
        .map_err(Error::from)
        .with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// Writes `run.conf` and `manifest.json` for a finished command.
fn finish(dir: &Path, command: &str, options: &impl Serialize, threads: usize, mut extra: Map<String, Value>) -> anyhow::Result<()> {
    let Value::Object(opts) = serde_json::to_value(options)? else {
        unreachable!("argument structs serialize to maps")
    };
    std::fs::write(dir.join("run.conf"), config::render(command, &opts)).map_err(Error::from)?;
    let mut manifest = Map::new();
    manifest.insert("version".into(), json!(qbm_core::io::VERSION));
    manifest.insert("command".into(), json!(command));
    manifest.insert("threads".into(), json!(threads));
    manifest.insert("config".into(), Value::Object(opts));
    manifest.append(&mut extra);
    qbm_core::io::write_json(dir.join("manifest.json"), &manifest)?;
    Ok(())
}

fn report(dir: &Path, file: &str, r: &ValidationReport) -> anyhow::Result<()> {
    r.write(dir.join(file))?;
    println!("{}", r.summary());
    Ok(())
}

fn cmd_coeffs(mut a: CoeffsArgs, threads: usize) -> anyhow::Result<bool> {
    let mode = a.mode.resolve();
    let p = a.params.physical(a.mode.quantum)?;
    let ts = time_scale(&p);
    let t_min = match a.t_min {
        Some(t) => t,
        None if a.mode.quantum => coefficients::t_min(&p)?,
        None => 0.0,
    };
    a.t_min = Some(t_min);
    let t_max = *a.t_max.get_or_insert(10.0 * ts);
    let n = *a.n.get_or_insert(200);
    if !(t_max > t_min) || n < 2 {
        return Err(input(format!("need t-max > t-min and n >= 2, got [{t_min}, {t_max}] with n = {n}")));
    }
    let dir = out_dir(&mut a.out)?;
    let table = build_table(&p, &linear_grid(t_min, t_max, n), mode)?;
    table.write(&dir, "coeffs")?;
    let mut files = vec!["coeffs.csv", "coeffs.json"];
    let mut passed = true;
    if a.validate {
        let r = suite::table_checks(&table);
        report(&dir, "validation.json", &r)?;
        passed = r.passed;
        files.push("validation.json");
    }
    if a.plot {
        std::fs::write(dir.join("plot.py"), plot::coeffs("coeffs")).map_err(Error::from)?;
        files.push("plot.py");
    }
    let mut extra = Map::new();
    extra.insert("params".into(), json!(p));
    extra.insert("mode".into(), json!(mode));
    extra.insert("files".into(), json!(files));
    finish(&dir, "coeffs", &a, threads, extra)?;
    Ok(passed)
}

fn cmd_fpe(mut a: FpeArgs, threads: usize) -> anyhow::Result<bool> {
    let mode = a.mode.resolve();
    let p = a.params.physical(a.mode.quantum)?;
    let ts = time_scale(&p);
    let form = match *a.form.get_or_insert(FormArg::Adelman) {
        FormArg::Adelman => Form::Adelman,
        FormArg::Drift => Form::DriftVelocity {
            v0: *a.v0.get_or_insert(0.0),
        },
    };
    let q0 = *a.q0.get_or_insert(1.0);
    let mut cfg = SolverConfig::new(*a.n_q.get_or_insert(2001), *a.dt.get_or_insert(1e-3 * ts), q0);
    cfg.scheme = match *a.scheme.get_or_insert(SchemeArg::Cn) {
        SchemeArg::Cn => Scheme::CrankNicolson,
        SchemeArg::Upwind => Scheme::UpwindSplit,
    };
    cfg.boundary = match *a.boundary.get_or_insert(BoundaryArg::ZeroFlux) {
        BoundaryArg::ZeroFlux => Boundary::ZeroFlux,
        BoundaryArg::Absorbing => Boundary::Absorbing,
    };
    cfg.init.width = a.width;
    cfg.half_width = a.half_width;
    cfg.t_start = *a.t_start.get_or_insert(if a.mode.quantum { ts } else { 0.0 });
    let t_final = *a.t_final.get_or_insert(2.0 * ts);
    let snaps = a.snapshots.clone().map(|s| s.0).unwrap_or_default();
    let dir = out_dir(&mut a.out)?;
    let sol = match mode {
        Mode::Classical => fpe::solve(&p, form, mode, t_final, &snaps, &cfg)?,
        Mode::Quantum(_) => {
            let rows = *a.table_n.get_or_insert(401);
            if rows < 3 || !(t_final > cfg.t_start) {
                return Err(input("quantum runs need table-n >= 3 and t-final > t-start"));
            }
            let table = build_table(&p, &linear_grid(cfg.t_start, t_final, rows), mode)?;
            fpe::solve_with(&table, form, t_final, &snaps, &cfg)?
        }
    };
    let run = sol.write(&dir, "fpe", &p, mode, a.compare_analytic)?;
    if a.plot {
        std::fs::write(dir.join("plot.py"), plot::fpe("fpe")).map_err(Error::from)?;
    }
    for s in &run.snapshots {
        match s.linf_relative {
            Some(e) => println!("t = {}: mass {:.12} relative L-inf error {e:e}", s.t, s.mass),
            None => println!("t = {}: mass {:.12}", s.t, s.mass),
        }
    }
    let mut extra = Map::new();
    extra.insert("run".into(), json!(run));
    finish(&dir, "fpe", &a, threads, extra)?;
    Ok(true)
}

fn cmd_sde(mut a: SdeArgs, threads: usize) -> anyhow::Result<bool> {
    let p = a.params.physical(false)?;
    let ts = time_scale(&p);
    let which = *a.simulator.get_or_insert(SimArg::Reduced);
    let q0 = *a.q0.get_or_insert(1.0);
    let v0 = match *a.v0.get_or_insert(V0Arg::Thermal) {
        V0Arg::Thermal => InitialVelocity::Thermal,
        V0Arg::Fixed(value) => InitialVelocity::Fixed { value },
    };
    let t_final = *a.t_final.get_or_insert(5.0 * ts);
    let outputs = *a.outputs.get_or_insert(101);
    if outputs < 2 {
        return Err(input("--outputs must be at least 2"));
    }
    let cfg = SimConfig::new(
        *a.paths.get_or_insert(10_000),
        *a.dt.get_or_insert(1e-3 * ts),
        t_final,
        *a.seed.get_or_insert(0),
    )
    .with_output_times(linear_grid(0.0, t_final, outputs));
    let dir = out_dir(&mut a.out)?;
    let mut runs = Vec::new();
    if matches!(which, SimArg::Reduced | SimArg::Both) {
        let src = qbm_core::source::AnalyticSource::new(p, Mode::Classical);
        runs.push(("reduced", sde::simulate_reduced(&src, q0, &cfg)?));
    }
    if matches!(which, SimArg::Langevin | SimArg::Both) {
        runs.push(("langevin", sde::simulate_langevin(&p, q0, v0, &cfg)?));
    }
    let mut files = Vec::new();
    for (name, s) in &runs {
        let csv = format!("sde_{name}.csv");
        s.write_csv(dir.join(&csv))?;
        files.push(csv);
        if a.raw {
            let bin = format!("sde_{name}.bin");
            s.write_raw(dir.join(&bin))?;
            files.push(bin);
        }
    }
    let mut passed = true;
    if runs.len() == 2 && v0 == InitialVelocity::Thermal {
        let (r, l) = (&runs[0].1, &runs[1].1);
        let mut rep = sde::equivalence_report(r, l, &GaussianDensity::classical(p, q0))?;
        // family-wise 5% over all output times
        let times = r.t.len() as f64;
        let scale = stats::ks_critical(0.05 / times) / stats::ks_critical(0.05);
        let ks = sde::ks_per_time(r, l)?.into_iter().map(|(t, d, thr)| (t, d / (thr * scale))).collect();
        rep.push(
            Check::worst_of("ks_reduced_vs_langevin", ks, 1.0)
                .detail("KS statistic over the Bonferroni-corrected 5% threshold"),
        );
        report(&dir, "equivalence.json", &rep)?;
        files.push("equivalence.json".into());
        passed = rep.passed;
    }
    if a.plot {
        let csvs: Vec<String> = files.iter().filter(|f| f.ends_with(".csv")).cloned().collect();
        std::fs::write(dir.join("plot.py"), plot::sde(&csvs)).map_err(Error::from)?;
        files.push("plot.py".into());
    }
    let mut extra = Map::new();
    extra.insert("params".into(), json!(p));
    extra.insert("simulation".into(), json!(cfg));
    extra.insert("files".into(), json!(files));
    if a.raw {
        extra.insert(
            "raw_layout".into(),
            json!("little-endian u64 n_paths, u64 n_times, then n_paths * n_times f64 positions, row-major by path"),
        );
    }
    finish(&dir, "sde", &a, threads, extra)?;
    Ok(passed)
}

fn cmd_validate(mut a: ValidateArgs, threads: usize) -> anyhow::Result<bool> {
    let which = *a.suite.get_or_insert(SuiteArg::All);
    let wants_quantum = which != SuiteArg::Classical;
    if wants_quantum {
        a.params.hbar.get_or_insert(1.0);
    }
    let p = a.params.physical(wants_quantum)?;
    let d = SuiteOptions::default();
    let opts = SuiteOptions {
        q0: *a.q0.get_or_insert(d.q0),
        n_paths: *a.paths.get_or_insert(d.n_paths),
        seed: *a.seed.get_or_insert(d.seed),
        quantum: QuantumOptions {
            n_max: *a.n_max.get_or_insert(d.quantum.n_max),
            tol: *a.tol.get_or_insert(d.quantum.tol),
        },
    };
    let dir = out_dir(&mut a.out)?;
    let mut passed = true;
    let mut files = Vec::new();
    if which != SuiteArg::Quantum {
        let r = suite::classical_suite(&p, &opts);
        report(&dir, "validation_classical.json", &r)?;
        passed &= r.passed;
        files.push("validation_classical.json");
    }
    if wants_quantum {
        let r = suite::quantum_suite(&p, &opts);
        report(&dir, "validation_quantum.json", &r)?;
        passed &= r.passed;
        files.push("validation_quantum.json");
    }
    let mut extra = Map::new();
    extra.insert("params".into(), json!(p));
    extra.insert("passed".into(), json!(passed));
    extra.insert("files".into(), json!(files));
    finish(&dir, "validate", &a, threads, extra)?;
    Ok(passed)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let threads = match cli.threads {
        Some(0) => return Err(input("--threads must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("starting the worker pool")?;
    match cli.command {
        Command::Coeffs(a) => cmd_coeffs(a, threads),
        Command::Fpe(a) => cmd_fpe(a, threads),
        Command::Sde(a) => cmd_sde(a, threads),
        Command::Validate(a) => cmd_validate(a, threads),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(err) if !err.is_input_error() && !matches!(err, Error::Io(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let mut cmd = Cli::command().args_override_self(true);
    for name in config::COMMANDS {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    let cli = match cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more checks failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
