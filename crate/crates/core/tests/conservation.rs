//! Conservation and decay structure over multi-step runs.

use msflux_core::diagnostics::{
    self, max_energy_inequality_violation, max_hs_increase, MonitorConfig, Termination,
};
use msflux_core::grid::{ScalarField, SpeciesField, TorusGrid, VectorField};
use msflux_core::integrate::{self, Scheme, StepperConfig, UBarSource};
use msflux_core::mixture::{gap_constants, DiffusionTable};
use msflux_core::spectral::SpectralWorkspace;

fn three_species_state(
    grid: TorusGrid,
    eps: f64,
) -> (DiffusionTable<f64>, integrate::SimulationState<f64>, SpectralWorkspace<f64>) {
    let ws = SpectralWorkspace::new(grid);
    let d = DiffusionTable::from_pairs(3, &[(0, 1, 1.0), (0, 2, 1.2), (1, 2, 0.8)]).unwrap();
    let mut c_tilde = SpeciesField::from_fn(grid, 3, |i, x: &[f64]| match i {
        0 => 0.4 * x[0].sin() + 0.2 * x[1].cos(),
        1 => 0.3 * (x[0] + x[1]).cos() - 0.2 * (2.0 * x[1]).sin(),
        _ => 0.0,
    });
    for i in 0..2 {
        let avg = c_tilde.species(i).average();
        let centered = c_tilde.species(i).map(|v| v - avg);
        *c_tilde.species_mut(i) = centered;
    }
    let closing = c_tilde
        .species(0)
        .zip_map(c_tilde.species(1), |a, b| -(a + b));
    *c_tilde.species_mut(2) = closing;

    let psi = ScalarField::from_fn(grid, |x: &[f64]| 0.01 * x[0].sin() * x[1].sin());
    let u_bar = ws.solenoidal_from_stream(&psi);
    let state = integrate::init_state(vec![1.0, 1.0, 1.0], eps, c_tilde, u_bar).unwrap();
    (d, state, ws)
}

#[test]
fn invariants_hold_over_a_two_dimensional_run() {
    let grid = TorusGrid::new(2, 16).unwrap();
    let (d, mut state, ws) = three_species_state(grid, 1e-3);
    let dt = 0.8 * integrate::cfl_limit(grid, &d, state.c0(), 0.9);
    let cfg = StepperConfig {
        scheme: Scheme::Explicit,
        dt,
        t_end: 200.0 * dt,
        cfl_safety: 0.9,
        linear_solver_tol: 1e-10,
        max_linear_iters: 500,
    };
    let monitor = MonitorConfig {
        s_norm: 2,
        cadence: 10,
    };
    let record = integrate::run(&mut state, &cfg, &ws, &d, &monitor, UBarSource::Static).unwrap();
    assert_eq!(record.termination, Termination::Completed);
    assert!(record.samples.len() >= 20);

    assert!(record.max_residual(|s| s.mass_residual) <= 1e-10);
    assert!(record.max_residual(|s| s.sum_zero_residual) <= 1e-9);
    assert!(record.max_residual(|s| s.equimolar_residual) <= 1e-10);
    assert!(record.max_residual(|s| s.incompressibility_residual) <= 1e-9);
    assert!(record.min_concentration() > 0.0);

    // Monotone H^2 decay and the quantified energy inequality.
    assert!(max_hs_increase(&record.samples) <= 1e-10);
    let gc = gap_constants(&d);
    let kappa = gc.lambda_a * 1.0 / 2.0; // min c_bar = 1
    assert!(max_energy_inequality_violation(&record.samples, kappa) <= 1e-10);
}

#[test]
fn semi_implicit_run_preserves_invariants() {
    let grid = TorusGrid::new(2, 16).unwrap();
    let (d, mut state, ws) = three_species_state(grid, 1e-3);
    let dt = 4.0 * integrate::cfl_limit(grid, &d, state.c0(), 0.9);
    let cfg = StepperConfig {
        scheme: Scheme::SemiImplicit,
        dt,
        t_end: 60.0 * dt,
        cfl_safety: 0.9,
        linear_solver_tol: 1e-11,
        max_linear_iters: 600,
    };
    let monitor = MonitorConfig {
        s_norm: 2,
        cadence: 5,
    };
    let record = integrate::run(&mut state, &cfg, &ws, &d, &monitor, UBarSource::Static).unwrap();
    assert_eq!(record.termination, Termination::Completed);
    assert!(record.max_residual(|s| s.mass_residual) <= 1e-10);
    assert!(record.max_residual(|s| s.sum_zero_residual) <= 1e-9);
    assert!(record.min_concentration() > 0.0);
    assert!(max_hs_increase(&record.samples) <= 1e-10);
}

#[test]
fn time_dependent_convection_velocity_contract() {
    let grid = TorusGrid::new(1, 32).unwrap();
    let ws = SpectralWorkspace::new(grid);
    let d = DiffusionTable::uniform(2, 1.0).unwrap();
    let c_tilde = SpeciesField::from_fn(grid, 2, |i, x: &[f64]| {
        if i == 0 {
            x[0].sin()
        } else {
            -x[0].sin()
        }
    });
    let mut state =
        integrate::init_state(vec![1.0, 1.0], 1e-3, c_tilde, VectorField::zeros(grid)).unwrap();
    let cfg = StepperConfig::explicit(0.004, 0.4);
    let monitor = MonitorConfig {
        s_norm: 2,
        cadence: 10,
    };
    // In 1-d any constant field is solenoidal; oscillate it over time.
    let source = |t: f64| {
        let mut v = VectorField::zeros(grid);
        *v.component_mut(0) = ScalarField::constant(grid, 0.05 * (3.0 * t).cos());
        v
    };
    let record = integrate::run(
        &mut state,
        &cfg,
        &ws,
        &d,
        &monitor,
        UBarSource::TimeDependent(&source),
    )
    .unwrap();
    assert_eq!(record.termination, Termination::Completed);
    assert!(record.max_residual(|s| s.mass_residual) <= 1e-10);
    assert!(record.max_residual(|s| s.sum_zero_residual) <= 1e-9);
}

#[test]
fn decay_rate_fits_the_monitored_norms() {
    let grid = TorusGrid::new(1, 64).unwrap();
    let ws = SpectralWorkspace::new(grid);
    let d = DiffusionTable::uniform(2, 1.0).unwrap();
    let c_tilde = SpeciesField::from_fn(grid, 2, |i, x: &[f64]| {
        if i == 0 {
            x[0].sin()
        } else {
            -x[0].sin()
        }
    });
    let mut state =
        integrate::init_state(vec![1.0, 1.0], 1e-3, c_tilde, VectorField::zeros(grid)).unwrap();
    let cfg = StepperConfig::explicit(0.004, 2.0);
    let monitor = MonitorConfig {
        s_norm: 2,
        cadence: 0,
    };
    let record = integrate::run(&mut state, &cfg, &ws, &d, &monitor, UBarSource::Static).unwrap();
    let fit = diagnostics::fit_decay_rate(
        &record.samples,
        (0.0, 2.0),
        diagnostics::NormColumn::L2,
    )
    .unwrap();
    // Effective diffusivity delta/C0 = 0.5 at mode one.
    assert!((fit.rate - 0.5).abs() <= 0.01, "rate {}", fit.rate);
    assert!(fit.r_squared > 0.9999);
}
