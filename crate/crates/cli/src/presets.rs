//! Built-in scenarios and construction of initial data from a validated
//! configuration.

use msflux_core::grid::{ScalarField, SpeciesField, TorusGrid, VectorField};
use msflux_core::mixture::DiffusionTable;
use msflux_core::spectral::{solenoidal_constant, SpectralWorkspace};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::config::{InitSpec, RunConfig, UBarSpec};
use crate::error::CliError;
use crate::snapshot;

/// Names and one-line descriptions of the built-in scenarios.
pub fn preset_catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "equilibrium",
            "two species at rest; every diagnostic residual stays at rounding level",
        ),
        (
            "two-species-mode-1",
            "single sine mode k=1; fitted decay rate ~ 0.5 (delta/C0 * k^2)",
        ),
        (
            "two-species-mode-2",
            "single sine mode k=2; fitted decay rate ~ 2.0 (rate scales with k^2)",
        ),
        (
            "three-species-2d",
            "three species on a 2-d grid with a weak stream-function convection field",
        ),
    ]
}

/// The TOML text of a built-in scenario, if the name is known.
pub fn preset_toml(name: &str) -> Option<String> {
    let text = match name {
        "equilibrium" => EQUILIBRIUM,
        "two-species-mode-1" => TWO_SPECIES_MODE_1,
        "two-species-mode-2" => TWO_SPECIES_MODE_2,
        "three-species-2d" => THREE_SPECIES_2D,
        _ => return None,
    };
    Some(text.trim_start().to_string())
}

const EQUILIBRIUM: &str = r#"
[grid]
dim = 1
points_per_axis = 64

[species]
n = 2
c_bar = [1.0, 1.0]
delta = [[0.0, 1.0], [1.0, 0.0]]

[perturbation]
eps = 0.001
init = "zero"

[stepper]
scheme = "explicit"
dt = 0.004
t_end = 1.0

[output]
directory = "out/equilibrium"
"#;

const TWO_SPECIES_MODE_1: &str = r#"
[grid]
dim = 1
points_per_axis = 64

[species]
n = 2
c_bar = [1.0, 1.0]
delta = [[0.0, 1.0], [1.0, 0.0]]

[perturbation]
eps = 0.001
init = "sine"
amplitude = 1.0
modes = [1]

[stepper]
scheme = "explicit"
dt = 0.004
t_end = 4.0

[diagnostics]
s_norm = 2

[output]
directory = "out/two-species-mode-1"
"#;

const TWO_SPECIES_MODE_2: &str = r#"
[grid]
dim = 1
points_per_axis = 64

[species]
n = 2
c_bar = [1.0, 1.0]
delta = [[0.0, 1.0], [1.0, 0.0]]

[perturbation]
eps = 0.001
init = "sine"
amplitude = 1.0
modes = [2]

[stepper]
scheme = "explicit"
dt = 0.004
t_end = 1.5

[diagnostics]
s_norm = 2

[output]
directory = "out/two-species-mode-2"
"#;

const THREE_SPECIES_2D: &str = r#"
[grid]
dim = 2
points_per_axis = 32

[species]
n = 3
c_bar = [1.0, 1.0, 1.0]
delta = [[0.0, 1.0, 1.2], [1.0, 0.0, 0.8], [1.2, 0.8, 0.0]]

[perturbation]
eps = 0.001
init = "random"
amplitude = 0.5
modes = [2]
seed = 7

[u_bar]
preset = "stream"
scale = 0.01

[stepper]
scheme = "explicit"
dt = 0.01
t_end = 10.0

[diagnostics]
s_norm = 2
cadence = 5

[output]
directory = "out/three-species-2d"
"#;

/// Seeded low-mode perturbation: random trigonometric modes up to
/// `max_mode` per axis, projected to pointwise species-sum zero and
/// per-species zero mean, then scaled to the requested peak amplitude.
pub fn random_perturbation(
    grid: TorusGrid,
    n_species: usize,
    max_mode: usize,
    amplitude: f64,
    seed: u64,
) -> SpeciesField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let mut fields = Vec::with_capacity(n_species);
    for _ in 0..(n_species - 1) {
        // One (coefficient, wavevector, phase) triple per mode and axis pair.
        let mut modes = Vec::new();
        for k0 in 1..=max_mode {
            for axis in 0..dim {
                let coeff: f64 = rng.gen_range(-1.0..1.0);
                let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                modes.push((axis, k0 as f64, coeff, phase));
            }
        }
        let f = ScalarField::from_fn(grid, move |x: &[f64]| {
            let mut v = 0.0;
            for &(axis, k, coeff, phase) in &modes {
                v += coeff * (k * x[axis] + phase).sin();
            }
            v
        });
        fields.push(f);
    }
    // The last species closes the pointwise sum.
    let mut closing = ScalarField::zeros(grid);
    for f in &fields {
        closing.axpy(-1.0, f);
    }
    fields.push(closing);

    let mut field = SpeciesField::from_fields(fields);
    for i in 0..n_species {
        let avg = field.species(i).average();
        let centered = field.species(i).map(|v| v - avg);
        *field.species_mut(i) = centered;
    }
    let peak = field.max_abs();
    if peak > 0.0 {
        field = field.scaled(amplitude / peak);
    }
    field
}

/// Sine-mode perturbation: species 0 and 1 carry opposite single modes.
pub fn sine_perturbation(
    grid: TorusGrid,
    n_species: usize,
    mode: usize,
    amplitude: f64,
) -> SpeciesField<f64> {
    let k = mode as f64;
    SpeciesField::from_fn(grid, n_species, move |i, x: &[f64]| match i {
        0 => amplitude * (k * x[0]).sin(),
        1 => -amplitude * (k * x[0]).sin(),
        _ => 0.0,
    })
}

/// Builds the convection velocity field of a validated configuration.
pub fn build_u_bar(
    ws: &SpectralWorkspace<f64>,
    grid: TorusGrid,
    spec: &UBarSpec,
) -> VectorField<f64> {
    match spec {
        UBarSpec::Zero => VectorField::zeros(grid),
        UBarSpec::Constant(values) => solenoidal_constant(grid, values),
        UBarSpec::Stream { scale } => match grid.dim() {
            2 => {
                let s = *scale;
                let psi = ScalarField::from_fn(grid, move |x: &[f64]| s * x[0].sin() * x[1].sin());
                ws.solenoidal_from_stream(&psi)
            }
            _ => {
                let s = *scale;
                let zero = ScalarField::zeros(grid);
                let az = ScalarField::from_fn(grid, move |x: &[f64]| s * x[0].sin() * x[1].sin());
                let potential =
                    VectorField::from_components(vec![zero.clone(), zero, az]).expect("3 components");
                ws.solenoidal_from_potential(&potential)
            }
        },
    }
}

/// Everything the runner needs, constructed from a validated config.
pub struct Scenario {
    pub grid: TorusGrid,
    pub table: DiffusionTable<f64>,
    pub ws: SpectralWorkspace<f64>,
    pub state: msflux_core::SimulationState64,
}

/// Instantiates grid, diffusion table, workspace and initial state.
///
/// `seed_override` takes precedence over the seed recorded in the file,
/// and the returned seed is whatever was actually used.
pub fn build_scenario(cfg: &RunConfig, seed_override: Option<u64>) -> Result<(Scenario, u64), CliError> {
    let grid = TorusGrid::new(cfg.grid.dim, cfg.grid.points_per_axis)?;
    let n = cfg.species.n;
    let flat: Vec<f64> = cfg.species.delta.iter().flatten().copied().collect();
    let table = DiffusionTable::new(n, &flat)?;
    let ws = SpectralWorkspace::new(grid);
    let seed = seed_override.unwrap_or(cfg.perturbation.seed);

    let mut start_t = 0.0;
    let c_tilde = match cfg.init_spec() {
        InitSpec::Zero => SpeciesField::zeros(grid, n),
        InitSpec::Sine => sine_perturbation(
            grid,
            n,
            cfg.perturbation.modes[0],
            cfg.perturbation.amplitude,
        ),
        InitSpec::Random => random_perturbation(
            grid,
            n,
            *cfg.perturbation.modes.iter().max().unwrap_or(&1),
            cfg.perturbation.amplitude,
            seed,
        ),
        InitSpec::File(path) => {
            let snap = snapshot::read_snapshot(&path)?;
            snapshot::check_header(&snap, grid, n, cfg.perturbation.eps, &cfg.species.c_bar)?;
            start_t = snap.t;
            snap.into_field(grid)
        }
    };

    let u_bar = build_u_bar(&ws, grid, &cfg.u_bar_spec());
    let mut state = msflux_core::integrate::init_state(
        cfg.species.c_bar.clone(),
        cfg.perturbation.eps,
        c_tilde,
        u_bar,
    )?;
    state.t = start_t;

    Ok((
        Scenario {
            grid,
            table,
            ws,
            state,
        },
        seed,
    ))
}
