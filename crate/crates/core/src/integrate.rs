//! Time integration of the fluctuation equation.
//!
//! Two steppers are provided. The explicit one is classical RK4 in a
//! method-of-lines setup over the orthogonal right-hand side, guarded by a
//! diffusive CFL bound. The semi-implicit one takes a backward-Euler step
//! in which the diffusion operator is evaluated with coefficients frozen
//! at the current concentrations while the transport term is lagged; the
//! resulting linear system is solved matrix-free with BiCGStab on the
//! sum-zero, mean-zero subspace.

use crate::diagnostics::{self, MonitorConfig, RunRecord, Sample, Termination};
use crate::error::{CoreError, Result};
use crate::grid::{SpeciesField, VectorField};
use crate::mixture::DiffusionTable;
use crate::orthogonal;
use crate::scalar::Real;
use crate::spectral::SpectralWorkspace;

/// Time stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Explicit,
    SemiImplicit,
}

/// Stepper parameters.
#[derive(Debug, Clone, Copy)]
pub struct StepperConfig<T: Real> {
    pub scheme: Scheme,
    pub dt: T,
    pub t_end: T,
    /// Fraction of the diffusive stability limit the explicit step may use.
    pub cfl_safety: T,
    /// Relative residual tolerance of the semi-implicit linear solve.
    pub linear_solver_tol: T,
    pub max_linear_iters: usize,
}

impl<T: Real> StepperConfig<T> {
    pub fn explicit(dt: T, t_end: T) -> Self {
        Self {
            scheme: Scheme::Explicit,
            dt,
            t_end,
            cfl_safety: T::from_f64_lossy(0.9),
            linear_solver_tol: T::from_f64_lossy(1e-10),
            max_linear_iters: 500,
        }
    }

    pub fn semi_implicit(dt: T, t_end: T) -> Self {
        Self {
            scheme: Scheme::SemiImplicit,
            ..Self::explicit(dt, t_end)
        }
    }
}

/// Snapshot of the evolving fluctuation.
///
/// The orthogonal velocity is never stored: it is recomputed from the
/// concentrations whenever needed, so the gradient relation cannot drift.
#[derive(Debug, Clone)]
pub struct SimulationState<T: Real> {
    pub t: T,
    pub c_tilde: SpeciesField<T>,
    pub eps: T,
    pub c_bar: Vec<T>,
    pub u_bar: VectorField<T>,
}

impl<T: Real> SimulationState<T> {
    pub fn c0(&self) -> T {
        let mut acc = T::zero();
        for &v in &self.c_bar {
            acc += v;
        }
        acc
    }

    /// Minimum of `c_bar + eps*c_tilde` over species and points.
    pub fn min_concentration(&self) -> T {
        let mut min = T::max_value().unwrap_or(T::from_f64_lossy(f64::MAX));
        for i in 0..self.c_tilde.n_species() {
            for &v in self.c_tilde.species(i).data() {
                let c = self.c_bar[i] + self.eps * v;
                if c < min {
                    min = c;
                }
            }
        }
        min
    }
}

/// Validates an initial fluctuation against the compatibility conditions:
/// pointwise species sum zero, per-species zero spatial mean, and strict
/// positivity of `c_bar + eps*c_tilde`.
pub fn init_state<T: Real>(
    c_bar: Vec<T>,
    eps: T,
    c_tilde_in: SpeciesField<T>,
    u_bar: VectorField<T>,
) -> Result<SimulationState<T>> {
    if c_bar.len() != c_tilde_in.n_species() {
        return Err(CoreError::DimensionMismatch {
            context: "equilibrium concentrations vs fluctuation",
            expected: c_tilde_in.n_species(),
            got: c_bar.len(),
        });
    }
    let scale = T::one() + c_tilde_in.max_abs();
    let tol = T::from_f64_lossy(1e-10) * scale;
    let sum_res = c_tilde_in.max_species_sum();
    if sum_res > tol {
        return Err(CoreError::MassCompatibilityViolated {
            reason: format!("pointwise species sum reaches {sum_res:e}"),
        });
    }
    let mean_res = c_tilde_in.max_mean_abs();
    if mean_res > tol {
        return Err(CoreError::MassCompatibilityViolated {
            reason: format!("per-species spatial mean reaches {mean_res:e}"),
        });
    }
    let state = SimulationState {
        t: T::zero(),
        c_tilde: c_tilde_in,
        eps,
        c_bar,
        u_bar,
    };
    let min_c = state.min_concentration();
    if !(min_c > T::zero()) {
        return Err(CoreError::PositivityViolated {
            t: 0.0,
            min_c: min_c.to_subset().unwrap_or(f64::NAN),
        });
    }
    Ok(state)
}

/// Diffusive stability limit for the explicit scheme:
/// `cfl_safety * dx^2 * C0 / (2 d * max_delta * 2)`.
pub fn cfl_limit<T: Real>(
    grid: crate::grid::TorusGrid,
    d: &DiffusionTable<T>,
    c0: T,
    cfl_safety: T,
) -> T {
    let dx = grid.dx::<T>();
    let margin = T::from_f64_lossy(2.0);
    let d_max = d.max_delta() / c0 * margin;
    let dim = T::from_usize_lossy(grid.dim());
    cfl_safety * dx * dx / (T::from_f64_lossy(2.0) * dim * d_max)
}

fn check_positivity<T: Real>(state: &SimulationState<T>) -> Result<()> {
    let min_c = state.min_concentration();
    if !(min_c > T::zero()) {
        return Err(CoreError::PositivityViolated {
            t: state.t.to_subset().unwrap_or(f64::NAN),
            min_c: min_c.to_subset().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// One RK4 step of the orthogonal right-hand side.
pub fn step_explicit<T: Real>(
    state: &SimulationState<T>,
    cfg: &StepperConfig<T>,
    ws: &SpectralWorkspace<T>,
    d: &DiffusionTable<T>,
) -> Result<SimulationState<T>> {
    step_explicit_dt(state, cfg, ws, d, cfg.dt)
}

fn step_explicit_dt<T: Real>(
    state: &SimulationState<T>,
    cfg: &StepperConfig<T>,
    ws: &SpectralWorkspace<T>,
    d: &DiffusionTable<T>,
    dt: T,
) -> Result<SimulationState<T>> {
    let limit = cfl_limit(state.c_tilde.grid(), d, state.c0(), cfg.cfl_safety);
    if dt > limit {
        return Err(CoreError::CflViolated {
            dt: dt.to_subset().unwrap_or(f64::NAN),
            limit: limit.to_subset().unwrap_or(f64::NAN),
        });
    }
    let rhs = |c: &SpeciesField<T>| {
        orthogonal::rhs_orthogonal(ws, d, &state.c_bar, state.eps, c, &state.u_bar)
    };
    let half = T::from_f64_lossy(0.5);
    let k1 = rhs(&state.c_tilde)?;
    let mut y = state.c_tilde.clone();
    y.axpy(half * dt, &k1);
    let k2 = rhs(&y)?;
    let mut y = state.c_tilde.clone();
    y.axpy(half * dt, &k2);
    let k3 = rhs(&y)?;
    let mut y = state.c_tilde.clone();
    y.axpy(dt, &k3);
    let k4 = rhs(&y)?;

    let sixth = dt / T::from_f64_lossy(6.0);
    let third = dt / T::from_f64_lossy(3.0);
    let mut c_next = state.c_tilde.clone();
    c_next.axpy(sixth, &k1);
    c_next.axpy(third, &k2);
    c_next.axpy(third, &k3);
    c_next.axpy(sixth, &k4);

    let next = SimulationState {
        t: state.t + dt,
        c_tilde: c_next,
        eps: state.eps,
        c_bar: state.c_bar.clone(),
        u_bar: state.u_bar.clone(),
    };
    check_positivity(&next)?;
    Ok(next)
}

/// Frozen-coefficient diffusion operator `h -> div(c_n * V[h])` with
/// `V[h]` the equimolar velocity of `A(c_n)^{-1} grad h`.
///
/// The pointwise factors make the species sum of the flux vanish exactly,
/// so the operator preserves the sum-zero, mean-zero subspace.
fn frozen_diffusion<T: Real>(
    ws: &SpectralWorkspace<T>,
    d: &DiffusionTable<T>,
    c_frozen: &SpeciesField<T>,
    h: &SpeciesField<T>,
) -> Result<SpeciesField<T>> {
    let grid = h.grid();
    let n = h.n_species();
    let grads = orthogonal::gradients_of(ws, h);
    let u = orthogonal::solve_species_gradient(c_frozen, d, &grads)?;
    let u = ws.dealias_velocity(&u);
    let v = orthogonal::equimolar_velocity(c_frozen, &u);
    let mut out = SpeciesField::zeros(grid, n);
    for i in 0..n {
        let flux = VectorField::from_components(
            (0..grid.dim())
                .map(|axis| {
                    c_frozen
                        .species(i)
                        .zip_map(v.species(i).component(axis), |a, b| a * b)
                })
                .collect(),
        )?;
        *out.species_mut(i) = ws.divergence(&flux);
    }
    Ok(ws.dealias_species(&out))
}

fn dot_fields<T: Real>(a: &SpeciesField<T>, b: &SpeciesField<T>) -> T {
    let mut acc = T::zero();
    for i in 0..a.n_species() {
        for (x, y) in a.species(i).data().iter().zip(b.species(i).data()) {
            acc += *x * *y;
        }
    }
    acc
}

fn norm_fields<T: Real>(a: &SpeciesField<T>) -> T {
    dot_fields(a, a).sqrt()
}

/// Exact projection onto the sum-zero (pointwise) and mean-zero
/// (per species) subspace.
fn project_compatible<T: Real>(f: &SpeciesField<T>) -> SpeciesField<T> {
    let n = f.n_species();
    let n_inv = T::one() / T::from_usize_lossy(n);
    let sum = f.sum_over_species();
    let mut out = f.map_species(|_, s| s.zip_map(&sum, |v, sv| v - sv * n_inv));
    for i in 0..n {
        let avg = out.species(i).average();
        *out.species_mut(i) = out.species(i).map(|v| v - avg);
    }
    out
}

/// Matrix-free BiCGStab; `apply` must be linear.
fn bicgstab<T: Real>(
    apply: &dyn Fn(&SpeciesField<T>) -> Result<SpeciesField<T>>,
    b: &SpeciesField<T>,
    x0: SpeciesField<T>,
    tol: T,
    max_iters: usize,
) -> Result<SpeciesField<T>> {
    let b_norm = norm_fields(b);
    if b_norm == T::zero() {
        return Ok(SpeciesField::zeros(b.grid(), b.n_species()));
    }
    let target = tol * b_norm;
    let mut x = x0;
    let mut r = b.clone();
    r.axpy(-T::one(), &apply(&x)?);
    if norm_fields(&r) <= target {
        return Ok(x);
    }
    let r_hat = r.clone();
    let mut rho = T::one();
    let mut alpha = T::one();
    let mut omega = T::one();
    let mut v = SpeciesField::zeros(b.grid(), b.n_species());
    let mut p = v.clone();
    let tiny = T::from_f64_lossy(1e-300);
    for iter in 0..max_iters {
        let rho_new = dot_fields(&r_hat, &r);
        if rho_new.abs() < tiny {
            return Err(CoreError::LinearSolveFailed {
                residual: (norm_fields(&r) / b_norm).to_subset().unwrap_or(f64::NAN),
                iters: iter,
                tol: tol.to_subset().unwrap_or(f64::NAN),
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        // p = r + beta (p - omega v)
        p.axpy(-omega, &v);
        let mut p_new = r.clone();
        p_new.axpy(beta, &p);
        p = p_new;
        v = apply(&p)?;
        let denom = dot_fields(&r_hat, &v);
        if denom.abs() < tiny {
            return Err(CoreError::LinearSolveFailed {
                residual: (norm_fields(&r) / b_norm).to_subset().unwrap_or(f64::NAN),
                iters: iter,
                tol: tol.to_subset().unwrap_or(f64::NAN),
            });
        }
        alpha = rho_new / denom;
        let mut s = r.clone();
        s.axpy(-alpha, &v);
        if norm_fields(&s) <= target {
            x.axpy(alpha, &p);
            return Ok(x);
        }
        let t_vec = apply(&s)?;
        let tt = dot_fields(&t_vec, &t_vec);
        if tt.abs() < tiny {
            return Err(CoreError::LinearSolveFailed {
                residual: (norm_fields(&s) / b_norm).to_subset().unwrap_or(f64::NAN),
                iters: iter,
                tol: tol.to_subset().unwrap_or(f64::NAN),
            });
        }
        omega = dot_fields(&t_vec, &s) / tt;
        x.axpy(alpha, &p);
        x.axpy(omega, &s);
        r = s;
        r.axpy(-omega, &t_vec);
        if norm_fields(&r) <= target {
            return Ok(x);
        }
        rho = rho_new;
    }
    Err(CoreError::LinearSolveFailed {
        residual: (norm_fields(&r) / b_norm).to_subset().unwrap_or(f64::NAN),
        iters: max_iters,
        tol: tol.to_subset().unwrap_or(f64::NAN),
    })
}

/// One backward-Euler step with diffusion coefficients frozen at the
/// current concentrations and lagged transport:
///
/// ```text
/// (I + dt * div(c_n V[.])) c_next = c_n_tilde - dt * u_bar . grad(c_n_tilde)
/// ```
pub fn step_semi_implicit<T: Real>(
    state: &SimulationState<T>,
    cfg: &StepperConfig<T>,
    ws: &SpectralWorkspace<T>,
    d: &DiffusionTable<T>,
) -> Result<SimulationState<T>> {
    step_semi_implicit_dt(state, cfg, ws, d, cfg.dt)
}

fn step_semi_implicit_dt<T: Real>(
    state: &SimulationState<T>,
    cfg: &StepperConfig<T>,
    ws: &SpectralWorkspace<T>,
    d: &DiffusionTable<T>,
    dt: T,
) -> Result<SimulationState<T>> {
    let c_frozen = orthogonal::total_concentration(&state.c_bar, state.eps, &state.c_tilde);
    let grads = orthogonal::gradients_of(ws, &state.c_tilde);
    let grid = state.c_tilde.grid();
    let n = state.c_tilde.n_species();

    // Lagged transport on the right-hand side.
    let mut b = state.c_tilde.clone();
    for i in 0..n {
        for axis in 0..grid.dim() {
            let transport = state
                .u_bar
                .component(axis)
                .zip_map(grads.species(i).component(axis), |a, g| a * g);
            b.species_mut(i).axpy(-dt, &ws.dealias(&transport));
        }
    }

    let apply = |h: &SpeciesField<T>| -> Result<SpeciesField<T>> {
        let mut out = h.clone();
        out.axpy(dt, &frozen_diffusion(ws, d, &c_frozen, h)?);
        Ok(out)
    };
    let x0 = state.c_tilde.clone();
    let solution = bicgstab(
        &apply,
        &b,
        x0,
        cfg.linear_solver_tol,
        cfg.max_linear_iters,
    )?;
    let c_next = project_compatible(&solution);

    let next = SimulationState {
        t: state.t + dt,
        c_tilde: c_next,
        eps: state.eps,
        c_bar: state.c_bar.clone(),
        u_bar: state.u_bar.clone(),
    };
    check_positivity(&next)?;
    Ok(next)
}

/// One step with the configured scheme and step size.
pub fn step<T: Real>(
    state: &SimulationState<T>,
    cfg: &StepperConfig<T>,
    ws: &SpectralWorkspace<T>,
    d: &DiffusionTable<T>,
    dt: T,
) -> Result<SimulationState<T>> {
    match cfg.scheme {
        Scheme::Explicit => step_explicit_dt(state, cfg, ws, d, dt),
        Scheme::SemiImplicit => step_semi_implicit_dt(state, cfg, ws, d, dt),
    }
}

/// Source of the convection velocity over time. The acceptance scenarios
/// use static fields; time-dependent sources plug in through the closure
/// variant.
pub enum UBarSource<'a, T: Real> {
    Static,
    TimeDependent(&'a dyn Fn(T) -> VectorField<T>),
}

/// Advances the state to `t_end`, sampling diagnostics at the monitor
/// cadence. Terminates early with the breach recorded when a step fails.
pub fn run<T: Real>(
    state: &mut SimulationState<T>,
    cfg: &StepperConfig<T>,
    ws: &SpectralWorkspace<T>,
    d: &DiffusionTable<T>,
    monitor: &MonitorConfig,
    u_bar_source: UBarSource<'_, T>,
) -> Result<RunRecord<T>> {
    let mut record = RunRecord::new();
    let sample = |state: &SimulationState<T>| -> Result<Sample<T>> {
        diagnostics::monitor_invariants(ws, d, state, monitor)
    };
    record.push(sample(state)?);

    let total_steps = {
        let span = cfg.t_end - state.t;
        let steps = (span / cfg.dt).ceil();
        let steps_f: f64 = steps.to_subset().unwrap_or(0.0);
        steps_f.max(0.0) as usize
    };
    let cadence = if monitor.cadence > 0 {
        monitor.cadence
    } else {
        (total_steps / 200).max(1)
    };

    let mut step_index = 0usize;
    while state.t < cfg.t_end - cfg.dt * T::from_f64_lossy(1e-9) {
        let remaining = cfg.t_end - state.t;
        let dt = if remaining < cfg.dt { remaining } else { cfg.dt };
        if let UBarSource::TimeDependent(f) = &u_bar_source {
            state.u_bar = f(state.t);
        }
        match step(state, cfg, ws, d, dt) {
            Ok(next) => *state = next,
            Err(err) => {
                record.terminate(Termination::Breach(err.to_string()));
                return Ok(record);
            }
        }
        step_index += 1;
        if step_index % cadence == 0 || state.t >= cfg.t_end - cfg.dt * T::from_f64_lossy(1e-9) {
            record.push(sample(state)?);
        }
    }
    record.terminate(Termination::Completed);
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;

    fn mode_state(m: usize, k: f64, eps: f64) -> (SpectralWorkspace<f64>, DiffusionTable<f64>, SimulationState<f64>) {
        let grid = TorusGrid::new(1, m).unwrap();
        let ws = SpectralWorkspace::new(grid);
        let d = DiffusionTable::uniform(2, 1.0).unwrap();
        let c_tilde = SpeciesField::from_fn(grid, 2, |i, x: &[f64]| {
            if i == 0 {
                (k * x[0]).sin()
            } else {
                -(k * x[0]).sin()
            }
        });
        let state = init_state(
            vec![1.0, 1.0],
            eps,
            c_tilde,
            VectorField::zeros(grid),
        )
        .unwrap();
        (ws, d, state)
    }

    #[test]
    fn init_state_validates_compatibility() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let zero = SpeciesField::<f64>::zeros(grid, 2);
        assert!(init_state(vec![1.0, 1.0], 0.05, zero, VectorField::zeros(grid)).is_ok());

        let ok = SpeciesField::from_fn(grid, 2, |i, x: &[f64]| if i == 0 { x[0].sin() } else { -x[0].sin() });
        assert!(init_state(vec![1.0, 1.0], 0.05, ok, VectorField::zeros(grid)).is_ok());

        let bad = SpeciesField::from_fn(grid, 2, |i, x: &[f64]| if i == 0 { x[0].sin() } else { 0.0 });
        assert!(matches!(
            init_state(vec![1.0, 1.0], 0.05, bad, VectorField::zeros(grid)),
            Err(CoreError::MassCompatibilityViolated { .. })
        ));

        let big = SpeciesField::from_fn(grid, 2, |i, x: &[f64]| if i == 0 { x[0].sin() } else { -x[0].sin() });
        assert!(matches!(
            init_state(vec![0.5, 0.5], 1.0, big, VectorField::zeros(grid)),
            Err(CoreError::PositivityViolated { .. })
        ));
    }

    #[test]
    fn equilibrium_is_a_fixed_point_of_both_schemes() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let ws = SpectralWorkspace::new(grid);
        let d = DiffusionTable::uniform(2, 1.0).unwrap();
        let state = init_state(
            vec![1.0, 2.0],
            0.1,
            SpeciesField::zeros(grid, 2),
            VectorField::zeros(grid),
        )
        .unwrap();
        let cfg = StepperConfig::explicit(1e-3, 1.0);
        let next = step_explicit(&state, &cfg, &ws, &d).unwrap();
        assert!(next.c_tilde.max_abs() <= 1e-14);
        let cfg = StepperConfig::semi_implicit(1e-2, 1.0);
        let next = step_semi_implicit(&state, &cfg, &ws, &d).unwrap();
        assert!(next.c_tilde.max_abs() <= 1e-14);
    }

    #[test]
    fn explicit_rejects_large_dt() {
        let (ws, d, state) = mode_state(64, 1.0, 1e-3);
        let cfg = StepperConfig::explicit(1.0, 2.0);
        assert!(matches!(
            step_explicit(&state, &cfg, &ws, &d),
            Err(CoreError::CflViolated { .. })
        ));
    }

    #[test]
    fn explicit_single_mode_decays_at_linear_rate() {
        let (ws, d, state) = mode_state(64, 1.0, 1e-3);
        let dt = 0.004;
        let steps = 250;
        let cfg = StepperConfig::explicit(dt, 10.0);
        let mut s = state;
        let norm0 = ws.sobolev_norm(&s.c_tilde, 0, None);
        for _ in 0..steps {
            s = step_explicit(&s, &cfg, &ws, &d).unwrap();
        }
        let norm1 = ws.sobolev_norm(&s.c_tilde, 0, None);
        let expected = (-0.5 * dt * steps as f64).exp();
        let ratio = norm1 / norm0;
        assert!(
            (ratio - expected).abs() <= 0.01 * expected,
            "ratio {ratio} vs {expected}"
        );
    }

    #[test]
    fn semi_implicit_single_mode_decays_at_linear_rate() {
        let (ws, d, state) = mode_state(64, 1.0, 1e-3);
        let dt = 0.04; // 10x the explicit step
        let steps = 25;
        let cfg = StepperConfig::semi_implicit(dt, 10.0);
        let mut s = state;
        let norm0 = ws.sobolev_norm(&s.c_tilde, 0, None);
        for _ in 0..steps {
            s = step_semi_implicit(&s, &cfg, &ws, &d).unwrap();
        }
        let norm1 = ws.sobolev_norm(&s.c_tilde, 0, None);
        let expected = (-0.5 * dt * steps as f64).exp();
        let ratio = norm1 / norm0;
        assert!(
            (ratio - expected).abs() <= 0.03 * expected,
            "ratio {ratio} vs {expected}"
        );
    }

    #[test]
    fn schemes_agree_at_matched_small_dt() {
        let (ws, d, state) = mode_state(32, 1.0, 1e-3);
        let dt = 0.005;
        let t_end = 1.0;
        let steps = (t_end / dt) as usize;
        let cfg_e = StepperConfig::explicit(dt, t_end);
        let cfg_i = StepperConfig::semi_implicit(dt, t_end);
        let mut se = state.clone();
        let mut si = state;
        for _ in 0..steps {
            se = step_explicit(&se, &cfg_e, &ws, &d).unwrap();
            si = step_semi_implicit(&si, &cfg_i, &ws, &d).unwrap();
        }
        let mut diff = se.c_tilde.clone();
        diff.axpy(-1.0, &si.c_tilde);
        let norm_in = 1.0; // unit-amplitude initial mode
        assert!(norm_fields(&diff) * 0.0 == 0.0);
        let delta = diff.max_abs();
        assert!(delta <= 5.0 * dt * norm_in, "delta {delta:e}");
    }

    #[test]
    fn mass_is_conserved_over_many_steps() {
        let (ws, d, state) = mode_state(32, 1.0, 1e-3);
        let cfg = StepperConfig::explicit(0.01, 20.0);
        let mut s = state;
        for _ in 0..1000 {
            s = step_explicit(&s, &cfg, &ws, &d).unwrap();
            }
        assert!(s.c_tilde.max_mean_abs() <= 1e-10);
        assert!(s.c_tilde.max_species_sum() <= 1e-9);
    }
}
