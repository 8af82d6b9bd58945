//! The `verify` subcommand: runs the structural property suite on built-in
//! scenarios and prints one line per check.

use msflux_core::diagnostics::{
    self, max_energy_inequality_violation, max_hs_increase, MonitorConfig,
};
use msflux_core::grid::{ScalarField, SpeciesField, TorusGrid, VectorField};
use msflux_core::integrate::{self, StepperConfig, UBarSource};
use msflux_core::mixture::{
    self, build_ms_matrix, gap_constants, project_orth_ones, DiffusionTable,
};
use msflux_core::orthogonal;
use msflux_core::spectral::SpectralWorkspace;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn matrix_suite(samples: usize) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_kernel = 0.0f64;
    let mut worst_qf = 0.0f64;
    let mut all_sym = true;
    let mut all_gap = true;
    let mut all_bound = true;
    let mut all_pinv_norm = true;
    let mut all_pinv_coerce = true;
    let mut worst_solve = 0.0f64;

    for _ in 0..samples {
        let n = rng.gen_range(2..=6);
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j, rng.gen_range(0.5..2.0)));
            }
        }
        let d = DiffusionTable::from_pairs(n, &pairs).unwrap();
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
        let x = project_orth_ones(
            &(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>(),
        );
        let a = build_ms_matrix(&c, &d).unwrap();

        let a1 = a.apply(&vec![1.0; n]).unwrap();
        let kr: f64 = a1.iter().map(|v| v * v).sum::<f64>().sqrt()
            / (1e-300 + a.frobenius_norm());
        worst_kernel = worst_kernel.max(kr);

        for i in 0..n {
            for j in 0..n {
                if a.get(i, j) != a.get(j, i) {
                    all_sym = false;
                }
            }
        }

        let qf = mixture::quadratic_form(&a, &x).unwrap();
        let ps = mixture::pair_sum_form(&c, &d, &x).unwrap();
        worst_qf = worst_qf.max((qf - ps).abs() / (1.0 + qf.abs()));

        all_gap &= mixture::check_spectral_gap(&c, &d, &x).unwrap().holds;
        all_bound &= mixture::check_operator_bound(&c, &d, &x).unwrap().holds;

        let rhs = project_orth_ones(
            &(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>(),
        );
        all_pinv_norm &= mixture::check_pinv_norm_bound(&c, &d, &rhs).unwrap().holds;
        all_pinv_coerce &= mixture::check_pinv_coercivity(&c, &d, &rhs).unwrap().holds;

        let ax = a.apply(&x).unwrap();
        let back = mixture::pseudo_solve(&a, &ax, 1e-8).unwrap();
        let scale: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err: f64 = back
            .iter()
            .zip(&x)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        worst_solve = worst_solve.max(err / (1.0 + scale));
    }

    vec![
        check(
            "matrix-kernel",
            worst_kernel <= 1e-14,
            format!("worst |A 1| / |A|_F = {worst_kernel:.2e} over {samples} samples"),
        ),
        check("matrix-symmetry", all_sym, "entrywise exact".to_string()),
        check(
            "quadratic-form-identity",
            worst_qf <= 1e-12,
            format!("worst relative gap = {worst_qf:.2e}"),
        ),
        check("spectral-gap", all_gap, format!("{samples} samples")),
        check("operator-bound", all_bound, format!("{samples} samples")),
        check(
            "pseudoinverse-norm-bound",
            all_pinv_norm,
            format!("{samples} samples"),
        ),
        check(
            "pseudoinverse-coercivity",
            all_pinv_coerce,
            format!("{samples} samples"),
        ),
        check(
            "pseudoinverse-roundtrip",
            worst_solve <= 1e-10,
            format!("worst relative error = {worst_solve:.2e}"),
        ),
    ]
}

fn spectral_suite() -> Vec<Check> {
    let grid = TorusGrid::new(1, 64).unwrap();
    let ws = SpectralWorkspace::new(grid);
    let mut worst = 0.0f64;
    for k in 1..32usize {
        let kf = k as f64;
        let f = ScalarField::from_fn(grid, |x: &[f64]| (kf * x[0]).sin());
        let g = ws.gradient(&f);
        let exact = ScalarField::from_fn(grid, |x: &[f64]| kf * (kf * x[0]).cos());
        let err = g
            .component(0)
            .zip_map(&exact, |a, b| (a - b).abs())
            .max_abs()
            / (1.0 + kf);
        worst = worst.max(err);
    }

    let grid2 = TorusGrid::new(2, 32).unwrap();
    let ws2 = SpectralWorkspace::new(grid2);
    let psi = ScalarField::from_fn(grid2, |x: &[f64]| x[0].sin() * x[1].sin());
    let stream_div = ws2.divergence(&ws2.solenoidal_from_stream(&psi)).max_abs();

    let grid3 = TorusGrid::new(3, 8).unwrap();
    let ws3 = SpectralWorkspace::new(grid3);
    let zero = ScalarField::zeros(grid3);
    let az = ScalarField::from_fn(grid3, |x: &[f64]| x[0].sin() * x[1].sin());
    let potential = VectorField::from_components(vec![zero.clone(), zero, az]).unwrap();
    let curl_div = ws3.divergence(&ws3.solenoidal_from_potential(&potential)).max_abs();

    // Adjointness of gradient and divergence under the grid inner product.
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst_adj = 0.0f64;
    for _ in 0..20 {
        let (a, b, c): (f64, f64, f64) = (
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let f = ScalarField::from_fn(grid2, |x: &[f64]| {
            a * x[0].sin() + b * (2.0 * x[1]).cos() + c * (x[0] + x[1]).sin()
        });
        let v = VectorField::from_components(vec![
            ScalarField::from_fn(grid2, |x: &[f64]| b * (x[0] + 2.0 * x[1]).cos()),
            ScalarField::from_fn(grid2, |x: &[f64]| c * x[1].sin() + a * x[0].cos()),
        ])
        .unwrap();
        let grad_f = ws2.gradient(&f);
        let div_v = ws2.divergence(&v);
        let cell = grid2.volume::<f64>() / grid2.n_points() as f64;
        let mut lhs = 0.0;
        for axis in 0..2 {
            for p in 0..grid2.n_points() {
                lhs += grad_f.component(axis).data()[p] * v.component(axis).data()[p];
            }
        }
        let mut rhs = 0.0;
        for p in 0..grid2.n_points() {
            rhs += f.data()[p] * div_v.data()[p];
        }
        worst_adj = worst_adj.max(((lhs + rhs) * cell).abs());
    }

    // Parseval: spectral s=0 norm against direct quadrature.
    let f = ScalarField::from_fn(grid2, |x: &[f64]| 0.4 + x[0].sin() * (3.0 * x[1]).cos());
    let parseval_gap = (ws2.sobolev_norm_scalar(&f, 0) - f.l2_norm()).abs();

    vec![
        check(
            "spectral-exactness",
            worst <= 1e-11,
            format!("worst scaled single-mode error = {worst:.2e}"),
        ),
        check(
            "solenoidal-families",
            stream_div <= 1e-12 && curl_div <= 1e-12,
            format!("stream div = {stream_div:.2e}, curl div = {curl_div:.2e}"),
        ),
        check(
            "gradient-divergence-adjoint",
            worst_adj <= 1e-10,
            format!("worst |<grad f, v> + <f, div v>| = {worst_adj:.2e}"),
        ),
        check(
            "parseval-quadrature",
            parseval_gap <= 1e-12,
            format!("gap = {parseval_gap:.2e}"),
        ),
    ]
}

fn poincare_check() -> Check {
    // Mean-zero band-limited fields on the unit-frequency torus satisfy
    // |f|_{H^s} <= C_p |grad f|_{H^s} with C_p = 1.
    let grid = TorusGrid::new(2, 32).unwrap();
    let ws = SpectralWorkspace::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_ratio = 0.0f64;
    for _ in 0..100 {
        let mut coeffs = Vec::new();
        for kx in 0..=3i32 {
            for ky in -3..=3i32 {
                if kx == 0 && ky == 0 {
                    continue;
                }
                coeffs.push((kx as f64, ky as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU)));
            }
        }
        let f = ScalarField::from_fn(grid, |x: &[f64]| {
            let mut v = 0.0;
            for &(kx, ky, a, phase) in &coeffs {
                v += a * (kx * x[0] + ky * x[1] + phase).sin();
            }
            v
        });
        let avg = f.average();
        let f = f.map(|v| v - avg);
        let s = 2;
        let num = ws.sobolev_norm_scalar(&f, s);
        let grad = ws.gradient(&f);
        let mut den_sq = 0.0;
        for axis in 0..2 {
            let n = ws.sobolev_norm_scalar(grad.component(axis), s);
            den_sq += n * n;
        }
        worst_ratio = worst_ratio.max(num / den_sq.sqrt());
    }
    check(
        "poincare-mean-zero",
        worst_ratio <= 1.0 + 1e-12,
        format!("worst |f| / |grad f| = {worst_ratio:.12}"),
    )
}

fn equivalence_roundtrip() -> Check {
    let grid = TorusGrid::new(2, 16).unwrap();
    let ws = SpectralWorkspace::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(2..=4);
        let d = DiffusionTable::uniform(n, rng.gen_range(0.5..2.0)).unwrap();
        let base: Vec<f64> = (0..n).map(|_| rng.gen_range(0.8..2.0)).collect();
        let mut fields = Vec::new();
        let mut sum = ScalarField::zeros(grid);
        for _ in 0..(n - 1) {
            let a = rng.gen_range(-0.1..0.1);
            let b = rng.gen_range(-0.1..0.1);
            let f = ScalarField::from_fn(grid, move |x: &[f64]| {
                a * x[0].sin() + b * (x[0] + x[1]).cos()
            });
            sum.axpy(1.0, &f);
            fields.push(f);
        }
        fields.push(sum.scaled(-1.0));
        let c = SpeciesField::from_fields(
            fields
                .into_iter()
                .enumerate()
                .map(|(i, f)| f.map(|v| base[i] + v))
                .collect(),
        );
        let u = orthogonal::compute_orthogonal_velocity(&ws, &c, &d).unwrap();
        let psi = ScalarField::from_fn(grid, |x: &[f64]| 0.03 * x[0].sin() * x[1].sin());
        let u_bar = ws.solenoidal_from_stream(&psi);
        let state = orthogonal::OrthogonalState::new(&ws, c, u.clone(), u_bar).unwrap();
        let full = orthogonal::reconstruct_full_velocity(&state);
        let back = orthogonal::orthogonal_part(&full);
        for i in 0..n {
            for axis in 0..2 {
                let err = back
                    .species(i)
                    .component(axis)
                    .zip_map(u.species(i).component(axis), |a, b| (a - b).abs())
                    .max_abs();
                worst = worst.max(err);
            }
        }
    }
    check(
        "equivalence-roundtrip",
        worst <= 1e-9,
        format!("worst recovery error = {worst:.2e} over 50 states"),
    )
}

fn stationarity_check() -> Check {
    let grid = TorusGrid::new(1, 64).unwrap();
    let ws = SpectralWorkspace::new(grid);
    let d = DiffusionTable::uniform(2, 1.0).unwrap();
    let mut state = integrate::init_state(
        vec![1.0, 1.0],
        1e-3,
        SpeciesField::zeros(grid, 2),
        VectorField::zeros(grid),
    )
    .unwrap();
    let cfg = StepperConfig::explicit(0.004, 0.4);
    let monitor = MonitorConfig {
        s_norm: 2,
        cadence: 10,
    };
    let record = integrate::run(&mut state, &cfg, &ws, &d, &monitor, UBarSource::Static).unwrap();
    let worst = record.max_residual(|s| s.norm_hs);
    check(
        "stationarity",
        record.completed() && worst <= 1e-13,
        format!("max |c~|_H2 over the run = {worst:.2e}"),
    )
}

fn conservation_check() -> Vec<Check> {
    let grid = TorusGrid::new(2, 16).unwrap();
    let ws = SpectralWorkspace::new(grid);
    let d = DiffusionTable::from_pairs(3, &[(0, 1, 1.0), (0, 2, 1.2), (1, 2, 0.8)]).unwrap();
    let c_tilde = crate::presets::random_perturbation(grid, 3, 2, 0.5, 11);
    let psi = ScalarField::from_fn(grid, |x: &[f64]| 0.01 * x[0].sin() * x[1].sin());
    let u_bar = ws.solenoidal_from_stream(&psi);
    let mut state = integrate::init_state(vec![1.0, 1.0, 1.0], 1e-3, c_tilde, u_bar).unwrap();
    let dt = 0.8 * integrate::cfl_limit(grid, &d, state.c0(), 0.9);
    let cfg = StepperConfig::explicit(dt, 200.0 * dt);
    let monitor = MonitorConfig {
        s_norm: 2,
        cadence: 10,
    };
    let record = integrate::run(&mut state, &cfg, &ws, &d, &monitor, UBarSource::Static).unwrap();
    let gc = gap_constants(&d);
    let kappa = gc.lambda_a * 1.0 / 2.0;
    vec![
        check(
            "conservation-mass",
            record.completed() && record.max_residual(|s| s.mass_residual) <= 1e-10,
            format!("max mean drift = {:.2e}", record.max_residual(|s| s.mass_residual)),
        ),
        check(
            "conservation-species-sum",
            record.max_residual(|s| s.sum_zero_residual) <= 1e-9,
            format!("max = {:.2e}", record.max_residual(|s| s.sum_zero_residual)),
        ),
        check(
            "equimolar-relation",
            record.max_residual(|s| s.equimolar_residual) <= 1e-10,
            format!("max = {:.2e}", record.max_residual(|s| s.equimolar_residual)),
        ),
        check(
            "incompressibility",
            record.max_residual(|s| s.incompressibility_residual) <= 1e-9,
            format!(
                "max = {:.2e}",
                record.max_residual(|s| s.incompressibility_residual)
            ),
        ),
        check(
            "positivity",
            record.min_concentration() > 0.0,
            format!("min concentration = {:.6}", record.min_concentration()),
        ),
        check(
            "monotone-energy",
            max_hs_increase(&record.samples) <= 1e-10,
            format!("max H2 increase = {:.2e}", max_hs_increase(&record.samples)),
        ),
        check(
            "energy-inequality",
            max_energy_inequality_violation(&record.samples, kappa) <= 1e-10,
            format!(
                "max violation = {:.2e}",
                max_energy_inequality_violation(&record.samples, kappa)
            ),
        ),
    ]
}

fn certificate_check() -> Check {
    let d = DiffusionTable::uniform(3, 1.0).unwrap();
    let cert = diagnostics::compute_certificate(&[1.0, 0.8, 1.2], &d, 1.0, 1.0);
    let res = diagnostics::certificate_residual(&cert);
    check(
        "certificate-tightness",
        res <= 1e-12,
        format!("smallness-equation residual = {res:.2e}"),
    )
}

fn derivative_estimate_check() -> Check {
    let grid = TorusGrid::new(1, 32).unwrap();
    let ws = SpectralWorkspace::new(grid);
    let d = DiffusionTable::uniform(2, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut all = true;
    for _ in 0..100 {
        let (a1, a2, b1, b2): (f64, f64, f64, f64) = (
            rng.gen_range(-0.2..0.2),
            rng.gen_range(-0.2..0.2),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let c = SpeciesField::from_fn(grid, 2, |i, x: &[f64]| {
            1.0 + if i == 0 {
                a1 * x[0].sin()
            } else {
                a2 * (2.0 * x[0]).cos()
            }
        });
        let u = msflux_core::grid::SpeciesVelocityField::from_fields(
            (0..2)
                .map(|i| {
                    VectorField::from_components(vec![ScalarField::from_fn(grid, |x: &[f64]| {
                        if i == 0 {
                            b1 * x[0].cos()
                        } else {
                            b2 * (3.0 * x[0]).sin()
                        }
                    })])
                    .unwrap()
                })
                .collect(),
        );
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        all &= diagnostics::check_derivative_estimate(&ws, &d, &c, &u, &[1], &x)
            .unwrap()
            .holds;
    }
    check(
        "derivative-estimate",
        all,
        "100 randomized smooth fields, |alpha| = 1".to_string(),
    )
}

/// Runs every check; returns them in print order.
pub fn run_all() -> Vec<Check> {
    let mut checks = matrix_suite(10_000);
    checks.extend(spectral_suite());
    checks.push(poincare_check());
    checks.push(equivalence_roundtrip());
    checks.push(stationarity_check());
    checks.extend(conservation_check());
    checks.push(certificate_check());
    checks.push(derivative_estimate_check());
    checks
}
