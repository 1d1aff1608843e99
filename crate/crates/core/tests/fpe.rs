use qbm_core::coefficients::{build_table, linear_grid, t_min, Mode, QuantumOptions};
use qbm_core::fpe::{solve, solve_with, Form, SolverConfig};
use qbm_core::propagator::{normal_pdf, GaussianDensity};
use qbm_core::response::chi_q;
use qbm_core::{stats, Error, PhysicalParams};

fn benchmark() -> PhysicalParams {
    PhysicalParams::reduced(1.0, 1.0, 0.16, 1.0, 0.0).unwrap()
}

#[test]
fn drift_form_averaged_over_velocity_equals_adelman_form() {
    let p = benchmark();
    let t = 2.0;
    let mut cfg = SolverConfig::new(1401, 1e-3, 1.0);
    cfg.half_width = Some(14.0);
    let adel = solve(&p, Form::Adelman, Mode::Classical, t, &[], &cfg).unwrap();
    let fa = &adel.snapshots[0];
    let width = adel.width;
    cfg.init.width = Some(width);

    let n_nodes = 20;
    let (x, w) = stats::gauss_hermite(n_nodes);
    let sd = (p.kt() / p.mass).sqrt();
    let mut avg = vec![0.0; fa.q.len()];
    let mut exact_mix = vec![0.0; fa.q.len()];
    let mut drift_err: f64 = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let v0 = std::f64::consts::SQRT_2 * sd * xi;
        let wt = wi / std::f64::consts::PI.sqrt();
        let sol = solve(&p, Form::DriftVelocity { v0 }, Mode::Classical, t, &[], &cfg).unwrap();
        let f = &sol.snapshots[0];
        assert_eq!(f.q, fa.q);
        let g = sol.oracle(&p, Mode::Classical);
        let e = g.density_grid(&f.q, t).unwrap();
        for i in 0..avg.len() {
            avg[i] += wt * f.values[i];
            exact_mix[i] += wt * e[i];
        }
        drift_err = drift_err.max(f.linf_error(&g).unwrap().0);
    }
    let thermal = adel.oracle(&p, Mode::Classical);
    let (adel_err, peak) = fa.linf_error(&thermal).unwrap();
    let te = thermal.density_grid(&fa.q, t).unwrap();
    // the widened initial conditions differ by s0^2 (1 - chi_q^2) in variance
    let init_gap = exact_mix.iter().zip(&te).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let gap = avg.iter().zip(&fa.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap <= drift_err + adel_err + init_gap + 1e-12, "gap {gap}");
    assert!(gap <= 2e-3 * peak, "gap {gap} peak {peak}");
}

#[test]
fn near_zero_temperature_tracks_the_mean() {
    let p = PhysicalParams::reduced(1.0, 1.0, 0.16, 1e-12, 0.0).unwrap();
    let cfg = SolverConfig::new(801, 1e-3, 1.0);
    let times = [0.5, 1.0, 2.0, 4.0];
    let sol = solve(&p, Form::Adelman, Mode::Classical, 4.0, &times, &cfg).unwrap();
    for f in &sol.snapshots {
        let exact = chi_q(&p, f.t);
        assert!((f.mean() - exact).abs() <= f.dq, "t={} {} {}", f.t, f.mean(), exact);
        // the width only contracts with chi_q
        assert!(f.variance().sqrt() <= sol.width * 1.01);
    }
    assert!(sol.diagnostics.max_mass_error <= 1e-8);
}

#[test]
fn quantum_table_drives_the_solver() {
    let p = PhysicalParams::reduced(1.0, 1.0, 0.16, 1.0, 0.5).unwrap();
    let mode = Mode::Quantum(QuantumOptions::default());
    assert!(t_min(&p).unwrap() < 0.5);
    let table = build_table(&p, &linear_grid(0.5, 3.0, 251), mode).unwrap();
    let mut cfg = SolverConfig::new(801, 1e-3, 1.0);
    cfg.t_start = 0.5;
    let sol = solve_with(&table, Form::Adelman, 3.0, &[], &cfg).unwrap();
    let g = sol.oracle(&p, mode);
    let (err, peak) = sol.snapshots[0].linf_error(&g).unwrap();
    assert!(err <= 1e-3 * peak, "{}", err / peak);
    assert!(sol.diagnostics.max_mass_error <= 1e-8);
}

#[test]
fn long_time_variance_reaches_equipartition() {
    let p = benchmark();
    let target = p.kt() / p.omega0_sq;
    for form in [Form::Adelman, Form::DriftVelocity { v0: 0.0 }] {
        let cfg = SolverConfig::new(1201, 1e-2, 1.0);
        let sol = solve(&p, form, Mode::Classical, 40.0, &[], &cfg).unwrap();
        let f = &sol.snapshots[0];
        // remove the propagated initial-width offset
        let s0 = sol.width * sol.width;
        let offset = match form {
            Form::Adelman => chi_q(&p, f.t).powi(2) * s0,
            Form::DriftVelocity { .. } => s0,
        };
        let var = f.variance() - offset;
        assert!((var - target).abs() <= 1e-3 * target, "{form:?} {var}");
        assert!(sol.diagnostics.max_mass_error <= 1e-8);
    }
}

#[test]
fn heat_kernel_pdf_helper() {
    assert!((normal_pdf(1.0, 1.0, 0.25) - 1.0 / (0.5 * (2.0 * std::f64::consts::PI).sqrt())).abs() < 1e-15);
    let g = GaussianDensity::classical(benchmark(), 1.0);
    assert!(matches!(g.density(0.0, 0.0), Err(Error::DegenerateVariance { .. })));
}
