//! Orthogonal velocity splitting.
//!
//! The full per-species velocity decomposes as `u = u_bar + V_U` where
//! `u_bar` is a common solenoidal convection velocity and `V_U` is the
//! diffusion velocity built from the orthogonal part `U` (pointwise
//! orthogonal to the ones vector in species space). `U` is determined by
//! the gradient relation `A(c) U = grad c`, solved independently at each
//! grid point and spatial direction.

use nalgebra::DVector;

use crate::error::{CoreError, Result};
use crate::grid::{ScalarField, SpeciesField, SpeciesVelocityField, TorusGrid, VectorField};
use crate::mixture::{self, DiffusionTable};
use crate::scalar::Real;
use crate::spectral::SpectralWorkspace;

/// A consistent `(c, U, u_bar)` triple.
///
/// Construction validates the structural invariants: constant total
/// concentration, pointwise orthogonality of `U`, and a divergence-free
/// `u_bar`.
#[derive(Debug, Clone)]
pub struct OrthogonalState<T: Real> {
    pub c: SpeciesField<T>,
    pub u: SpeciesVelocityField<T>,
    pub u_bar: VectorField<T>,
    pub c0: T,
}

impl<T: Real> OrthogonalState<T> {
    pub fn new(
        ws: &SpectralWorkspace<T>,
        c: SpeciesField<T>,
        u: SpeciesVelocityField<T>,
        u_bar: VectorField<T>,
    ) -> Result<Self> {
        check_strictly_positive(&c)?;
        let total = c.sum_over_species();
        let c0 = total.average();
        let dev = total.map(|v| v - c0).max_abs();
        if dev > T::from_f64_lossy(1e-10) * c0 {
            return Err(CoreError::MassCompatibilityViolated {
                reason: format!("total concentration varies by {dev:e} (C0 = {c0:e})"),
            });
        }
        let grid = c.grid();
        let n = c.n_species();
        let mut buf = vec![T::zero(); n];
        for axis in 0..grid.dim() {
            for p in 0..grid.n_points() {
                u.point_into(axis, p, &mut buf);
                let mut s = T::zero();
                for &v in &buf {
                    s += v;
                }
                if s.abs() > T::from_f64_lossy(1e-12) * (T::one() + u.max_abs()) {
                    return Err(CoreError::MassCompatibilityViolated {
                        reason: format!(
                            "orthogonal velocity has ones-component {:e} at point {p}",
                            s
                        ),
                    });
                }
            }
        }
        let div = ws.divergence(&u_bar).max_abs();
        if div > T::from_f64_lossy(1e-10) * (T::one() + u_bar.max_abs()) {
            return Err(CoreError::MassCompatibilityViolated {
                reason: format!("u_bar has divergence {div:e}"),
            });
        }
        Ok(Self { c, u, u_bar, c0 })
    }
}

fn check_strictly_positive<T: Real>(c: &SpeciesField<T>) -> Result<()> {
    for i in 0..c.n_species() {
        for (p, &v) in c.species(i).data().iter().enumerate() {
            if !(v > T::zero()) {
                return Err(CoreError::NonPositiveConcentration {
                    species: i,
                    point: p,
                    value: v.to_subset().unwrap_or(f64::NAN),
                });
            }
        }
    }
    Ok(())
}

/// Per-species spectral gradients, regrouped per spatial direction.
fn species_gradients<T: Real>(
    ws: &SpectralWorkspace<T>,
    f: &SpeciesField<T>,
) -> SpeciesVelocityField<T> {
    SpeciesVelocityField::from_fields(
        (0..f.n_species())
            .map(|i| ws.gradient(f.species(i)))
            .collect(),
    )
}

/// Solves `A(c(x)) U(x) = g(x)` with `<U,1> = 0` at every grid point and
/// direction, where `g` is the species gradient field handed in.
///
/// The right-hand side must be pointwise orthogonal to the ones vector up
/// to `1e-8` of its magnitude; the remaining rounding-level component is
/// projected out exactly before each solve.
pub fn solve_species_gradient<T: Real>(
    c: &SpeciesField<T>,
    d: &DiffusionTable<T>,
    g: &SpeciesVelocityField<T>,
) -> Result<SpeciesVelocityField<T>> {
    let grid = c.grid();
    let n = c.n_species();
    let dim = grid.dim();
    let n_inv = T::one() / T::from_usize_lossy(n);

    let scale = g.max_abs();
    let tol = T::from_f64_lossy(1e-8) * (T::one() + scale);
    let mut cbuf = vec![T::zero(); n];
    let mut gbuf = vec![vec![T::zero(); n]; dim];

    let mut out = SpeciesVelocityField::zeros(grid, n);
    let mut b = DVector::zeros(n + 1);
    for p in 0..grid.n_points() {
        c.point_into(p, &mut cbuf);
        let mut worst = T::zero();
        for axis in 0..dim {
            g.point_into(axis, p, &mut gbuf[axis]);
            let mut s = T::zero();
            for &v in &gbuf[axis] {
                s += v;
            }
            if s.abs() > worst {
                worst = s.abs();
            }
            // Exact projection of the rounding-level ones-component.
            let shift = s * n_inv;
            for v in gbuf[axis].iter_mut() {
                *v -= shift;
            }
        }
        if worst > tol {
            return Err(CoreError::GradientNotOrthogonal {
                residual: worst.to_subset().unwrap_or(f64::NAN),
                tol: tol.to_subset().unwrap_or(f64::NAN),
            });
        }

        let a = mixture::build_ms_matrix(&cbuf, d)?;
        let stacked = mixture::stack_with_ones_row(&a);
        let qr = stacked.qr();
        for axis in 0..dim {
            for i in 0..n {
                b[i] = gbuf[axis][i];
            }
            b[n] = T::zero();
            let x = mixture::solve_stacked_qr(&qr, &mut b, n);
            for i in 0..n {
                out.species_mut(i).component_mut(axis).data_mut()[p] = x[i];
            }
        }
    }
    Ok(out)
}

/// Orthogonal velocity of a concentration field: `A(c) U = grad c` with
/// `U` pointwise orthogonal to ones.
///
/// Requires strictly positive concentrations and a species-summed gradient
/// that vanishes pointwise (guaranteed when the total concentration is
/// constant in space).
pub fn compute_orthogonal_velocity<T: Real>(
    ws: &SpectralWorkspace<T>,
    c: &SpeciesField<T>,
    d: &DiffusionTable<T>,
) -> Result<SpeciesVelocityField<T>> {
    check_strictly_positive(c)?;
    let g = species_gradients(ws, c);
    solve_species_gradient(c, d, &g)
}

/// Orthogonal velocity of the fluctuation: `A(c_bar + eps*c_tilde) U = grad c_tilde`.
pub fn fluctuation_velocity<T: Real>(
    ws: &SpectralWorkspace<T>,
    d: &DiffusionTable<T>,
    c_bar: &[T],
    eps: T,
    c_tilde: &SpeciesField<T>,
) -> Result<SpeciesVelocityField<T>> {
    let c = total_concentration(c_bar, eps, c_tilde);
    check_strictly_positive(&c)?;
    let g = species_gradients(ws, c_tilde);
    solve_species_gradient(&c, d, &g)
}

/// `c = c_bar + eps * c_tilde`.
pub fn total_concentration<T: Real>(c_bar: &[T], eps: T, c_tilde: &SpeciesField<T>) -> SpeciesField<T> {
    c_tilde.map_species(|i, s| s.map(|v| c_bar[i] + eps * v))
}

/// Equimolar diffusion velocity `V_U = U - (<c,U>/<c,1>) 1`, pointwise.
///
/// The output satisfies `<c(x), V_U(x)> = 0` at every grid point by
/// construction.
pub fn equimolar_velocity<T: Real>(
    c: &SpeciesField<T>,
    u: &SpeciesVelocityField<T>,
) -> SpeciesVelocityField<T> {
    let grid = c.grid();
    let n = c.n_species();
    let dim = grid.dim();
    let mut out = u.clone();
    let mut cbuf = vec![T::zero(); n];
    let mut ubuf = vec![T::zero(); n];
    for p in 0..grid.n_points() {
        c.point_into(p, &mut cbuf);
        let mut total = T::zero();
        for &v in &cbuf {
            total += v;
        }
        for axis in 0..dim {
            u.point_into(axis, p, &mut ubuf);
            let mut dot = T::zero();
            for i in 0..n {
                dot += cbuf[i] * ubuf[i];
            }
            let shift = dot / total;
            for i in 0..n {
                out.species_mut(i).component_mut(axis).data_mut()[p] = ubuf[i] - shift;
            }
        }
    }
    out
}

/// Full per-species velocity `u_i = u_bar + (V_U)_i`.
pub fn reconstruct_full_velocity<T: Real>(state: &OrthogonalState<T>) -> SpeciesVelocityField<T> {
    let v = equimolar_velocity(&state.c, &state.u);
    let n = state.c.n_species();
    let mut out = v;
    for i in 0..n {
        for axis in 0..state.c.grid().dim() {
            out.species_mut(i)
                .component_mut(axis)
                .axpy(T::one(), state.u_bar.component(axis));
        }
    }
    out
}

/// Splits a full velocity back into its orthogonal part, pointwise:
/// `U = u - (<u,1>/N) 1`.
pub fn orthogonal_part<T: Real>(u: &SpeciesVelocityField<T>) -> SpeciesVelocityField<T> {
    let grid = u.grid();
    let n = u.n_species();
    let n_inv = T::one() / T::from_usize_lossy(n);
    let mut out = u.clone();
    let mut ubuf = vec![T::zero(); n];
    for p in 0..grid.n_points() {
        for axis in 0..grid.dim() {
            u.point_into(axis, p, &mut ubuf);
            let mut s = T::zero();
            for &v in &ubuf {
                s += v;
            }
            let shift = s * n_inv;
            for i in 0..n {
                out.species_mut(i).component_mut(axis).data_mut()[p] = ubuf[i] - shift;
            }
        }
    }
    out
}

/// Molar average velocity `<c,u>/<c,1>`, pointwise per direction.
pub fn molar_average_velocity<T: Real>(
    c: &SpeciesField<T>,
    u: &SpeciesVelocityField<T>,
) -> VectorField<T> {
    let grid = c.grid();
    let n = c.n_species();
    let mut out = VectorField::zeros(grid);
    let mut cbuf = vec![T::zero(); n];
    let mut ubuf = vec![T::zero(); n];
    for p in 0..grid.n_points() {
        c.point_into(p, &mut cbuf);
        let mut total = T::zero();
        for &v in &cbuf {
            total += v;
        }
        for axis in 0..grid.dim() {
            u.point_into(axis, p, &mut ubuf);
            let mut dot = T::zero();
            for i in 0..n {
                dot += cbuf[i] * ubuf[i];
            }
            out.component_mut(axis).data_mut()[p] = dot / total;
        }
    }
    out
}

/// Time derivative of the fluctuation:
///
/// ```text
/// d/dt c_tilde = -[ c_bar div(V) + u_bar . grad(c_tilde) + eps div(c_tilde V) ]
/// ```
///
/// with `V` the equimolar velocity of the fluctuation. The velocity is
/// 2/3-rule truncated after the pointwise solve and the assembled output is
/// truncated once more; both truncations are linear, so the pointwise
/// species sum and the per-species spatial mean of the output vanish to
/// rounding.
pub fn rhs_orthogonal<T: Real>(
    ws: &SpectralWorkspace<T>,
    d: &DiffusionTable<T>,
    c_bar: &[T],
    eps: T,
    c_tilde: &SpeciesField<T>,
    u_bar: &VectorField<T>,
) -> Result<SpeciesField<T>> {
    let grid = c_tilde.grid();
    let n = c_tilde.n_species();
    let c = total_concentration(c_bar, eps, c_tilde);
    check_strictly_positive(&c)?;

    let grads = species_gradients(ws, c_tilde);
    let u = solve_species_gradient(&c, d, &grads)?;
    let u = ws.dealias_velocity(&u);
    let v = equimolar_velocity(&c, &u);

    let mut out = SpeciesField::zeros(grid, n);
    for i in 0..n {
        // c_bar_i * div(V_i)
        let mut acc = ws.divergence(v.species(i)).scaled(c_bar[i]);
        // u_bar . grad(c_tilde_i)
        for axis in 0..grid.dim() {
            let transport = u_bar
                .component(axis)
                .zip_map(grads.species(i).component(axis), |a, b| a * b);
            acc.axpy(T::one(), &transport);
        }
        // eps * div(c_tilde_i V_i)
        if eps != T::zero() {
            let flux = VectorField::from_components(
                (0..grid.dim())
                    .map(|axis| {
                        c_tilde
                            .species(i)
                            .zip_map(v.species(i).component(axis), |a, b| a * b)
                    })
                    .collect(),
            )?;
            acc.axpy(eps, &ws.divergence(&flux));
        }
        *out.species_mut(i) = acc.scaled(-T::one());
    }
    Ok(ws.dealias_species(&out))
}

/// Largest pointwise `|<c, u_tilde>|` over directions; zero is the
/// equimolar relation.
pub fn equimolar_residual<T: Real>(c: &SpeciesField<T>, u_tilde: &SpeciesVelocityField<T>) -> T {
    let grid = c.grid();
    let n = c.n_species();
    let mut worst = T::zero();
    let mut cbuf = vec![T::zero(); n];
    let mut ubuf = vec![T::zero(); n];
    for p in 0..grid.n_points() {
        c.point_into(p, &mut cbuf);
        for axis in 0..grid.dim() {
            u_tilde.point_into(axis, p, &mut ubuf);
            let mut dot = T::zero();
            for i in 0..n {
                dot += cbuf[i] * ubuf[i];
            }
            if dot.abs() > worst {
                worst = dot.abs();
            }
        }
    }
    worst
}

/// Largest pointwise `|div <c,u>|`, the incompressibility residual of the
/// total flux.
pub fn incompressibility_residual<T: Real>(
    ws: &SpectralWorkspace<T>,
    c: &SpeciesField<T>,
    u: &SpeciesVelocityField<T>,
) -> T {
    let grid = c.grid();
    let n = c.n_species();
    let mut flux_components = Vec::with_capacity(grid.dim());
    for axis in 0..grid.dim() {
        let mut flux = ScalarField::zeros(grid);
        for i in 0..n {
            let term = c
                .species(i)
                .zip_map(u.species(i).component(axis), |a, b| a * b);
            flux.axpy(T::one(), &term);
        }
        flux_components.push(flux);
    }
    let total_flux = VectorField::from_components(flux_components).expect("dim components");
    ws.divergence(&total_flux).max_abs()
}

/// Worst pointwise residual of the gradient relation `A(c) U = g` relative
/// to the magnitude of `g` (used by tests and the verification suite).
pub fn gradient_relation_residual<T: Real>(
    c: &SpeciesField<T>,
    d: &DiffusionTable<T>,
    u: &SpeciesVelocityField<T>,
    g: &SpeciesVelocityField<T>,
) -> Result<T> {
    let grid = c.grid();
    let n = c.n_species();
    let mut cbuf = vec![T::zero(); n];
    let mut ubuf = vec![T::zero(); n];
    let mut gbuf = vec![T::zero(); n];
    let mut worst = T::zero();
    for p in 0..grid.n_points() {
        c.point_into(p, &mut cbuf);
        let a = mixture::build_ms_matrix(&cbuf, d)?;
        for axis in 0..grid.dim() {
            u.point_into(axis, p, &mut ubuf);
            g.point_into(axis, p, &mut gbuf);
            let au = a.apply(&ubuf)?;
            for i in 0..n {
                let r = (au[i] - gbuf[i]).abs();
                if r > worst {
                    worst = r;
                }
            }
        }
    }
    Ok(worst)
}

/// Gradients of each species as a velocity-shaped field (public so callers
/// can feed [`gradient_relation_residual`]).
pub fn gradients_of<T: Real>(
    ws: &SpectralWorkspace<T>,
    f: &SpeciesField<T>,
) -> SpeciesVelocityField<T> {
    species_gradients(ws, f)
}

/// Builds a grid-shaped helper: a species field constant per species.
pub fn uniform_species_field<T: Real>(grid: TorusGrid, values: &[T]) -> SpeciesField<T> {
    SpeciesField::from_fields(
        values
            .iter()
            .map(|&v| ScalarField::constant(grid, v))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::solenoidal_constant;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn setup1d(m: usize) -> (SpectralWorkspace<f64>, DiffusionTable<f64>) {
        let grid = TorusGrid::new(1, m).unwrap();
        (
            SpectralWorkspace::new(grid),
            DiffusionTable::uniform(2, 1.0).unwrap(),
        )
    }

    #[test]
    fn uniform_concentration_gives_zero_velocity() {
        let (ws, d) = setup1d(32);
        let c = uniform_species_field(ws.grid(), &[1.0, 2.0]);
        let u = compute_orthogonal_velocity(&ws, &c, &d).unwrap();
        assert!(u.max_abs() <= 1e-13);
    }

    #[test]
    fn two_species_velocity_matches_closed_form() {
        // For N = 2 the constrained solve has the closed form
        // U_1 = -delta * dc_1/dx / (2 c_1 c_2), U_2 = -U_1.
        let (ws, d) = setup1d(64);
        let eps = 0.05;
        let c_bar = [1.0, 2.0];
        let c_tilde = SpeciesField::from_fn(ws.grid(), 2, |i, x: &[f64]| {
            if i == 0 {
                x[0].sin()
            } else {
                -x[0].sin()
            }
        });
        let u = fluctuation_velocity(&ws, &d, &c_bar, eps, &c_tilde).unwrap();
        let c = total_concentration(&c_bar, eps, &c_tilde);
        for p in 0..ws.grid().n_points() {
            let x = ws.grid().coords::<f64>(p)[0];
            let dc = x.cos(); // d/dx of sin
            let c1 = c.species(0).data()[p];
            let c2 = c.species(1).data()[p];
            let expected = -1.0 * dc / (2.0 * c1 * c2);
            let got = u.species(0).component(0).data()[p];
            assert!((got - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
            let anti = u.species(1).component(0).data()[p];
            assert!((got + anti).abs() <= 1e-12);
        }
    }

    #[test]
    fn velocity_satisfies_gradient_relation() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let ws = SpectralWorkspace::new(grid);
        let d = DiffusionTable::from_pairs(3, &[(0, 1, 1.0), (0, 2, 2.0), (1, 2, 3.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let amp: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.2..0.2)).collect();
        // Random smooth sum-zero perturbation on top of a uniform state.
        let c_tilde = SpeciesField::from_fn(grid, 3, |i, x: &[f64]| {
            let v = amp[2 * i] * x[0].sin() + amp[2 * i + 1] * (x[1] * 2.0).cos();
            match i {
                0 => v,
                1 => v,
                _ => 0.0,
            }
        });
        // Make species sum zero pointwise: species 2 carries minus the rest.
        let s01 = c_tilde.species(0).zip_map(c_tilde.species(1), |a, b| a + b);
        let mut c_tilde = c_tilde;
        *c_tilde.species_mut(2) = s01.scaled(-1.0);

        let c_bar = [1.0, 1.5, 2.0];
        let c = total_concentration(&c_bar, 1.0, &c_tilde);
        let u = compute_orthogonal_velocity(&ws, &c, &d).unwrap();
        let g = gradients_of(&ws, &c);
        let res = gradient_relation_residual(&c, &d, &u, &g).unwrap();
        assert!(res <= 1e-10 * (1.0 + g.max_abs()), "residual {res:e}");
    }

    #[test]
    fn equimolar_identity_cases() {
        let (ws, _) = setup1d(16);
        let grid = ws.grid();
        let c = uniform_species_field(grid, &[1.0, 1.0]);
        let v_field = ScalarField::from_fn(grid, |x: &[f64]| x[0].cos());
        let u = SpeciesVelocityField::from_fields(vec![
            VectorField::from_components(vec![v_field.clone()]).unwrap(),
            VectorField::from_components(vec![v_field.scaled(-1.0)]).unwrap(),
        ]);
        // <c,U> = 0 already, so V = U.
        let v = equimolar_velocity(&c, &u);
        for p in 0..grid.n_points() {
            assert!(
                (v.species(0).component(0).data()[p] - u.species(0).component(0).data()[p]).abs()
                    <= 1e-15
            );
        }

        let zero = SpeciesVelocityField::zeros(grid, 2);
        let vz = equimolar_velocity(&c, &zero);
        assert!(vz.max_abs() == 0.0);
    }

    #[test]
    fn equimolar_relation_holds_for_random_inputs() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(2..=4);
            let c = SpeciesField::from_fn(grid, n, |i, x: &[f64]| {
                0.5 + (i as f64 + 1.0) * 0.3 + 0.1 * ((i as f64 + 1.0) * x[0]).sin()
            });
            let u = SpeciesVelocityField::from_fields(
                (0..n)
                    .map(|i| {
                        VectorField::from_components(vec![ScalarField::from_fn(grid, |x: &[f64]| {
                            ((i as f64 + 1.0) * x[0]).cos()
                        })])
                        .unwrap()
                    })
                    .collect(),
            );
            let v = equimolar_velocity(&c, &u);
            assert!(equimolar_residual(&c, &v) <= 1e-12);
        }
    }

    #[test]
    fn reconstruction_cases() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let ws = SpectralWorkspace::new(grid);
        let c = uniform_species_field(grid, &[1.0, 2.0]);

        // U = 0, u_bar = 0 -> u = 0
        let state = OrthogonalState::new(
            &ws,
            c.clone(),
            SpeciesVelocityField::zeros(grid, 2),
            VectorField::zeros(grid),
        )
        .unwrap();
        assert!(reconstruct_full_velocity(&state).max_abs() == 0.0);

        // U = 0, u_bar solenoidal (constant in 1-d) -> u_i = u_bar, and the
        // total flux C0 * u_bar is divergence-free.
        let u_bar = solenoidal_constant::<f64>(grid, &[0.7]);
        let state = OrthogonalState::new(
            &ws,
            c.clone(),
            SpeciesVelocityField::zeros(grid, 2),
            u_bar.clone(),
        )
        .unwrap();
        let u = reconstruct_full_velocity(&state);
        for i in 0..2 {
            let err = u
                .species(i)
                .component(0)
                .zip_map(u_bar.component(0), |a, b| (a - b).abs())
                .max_abs();
            assert!(err <= 1e-15);
        }
        assert!(incompressibility_residual(&ws, &c, &u) <= 1e-10);
    }

    #[test]
    fn molar_average_identity() {
        // <c,u> = C0 * u_bar pointwise after reconstruction.
        let grid = TorusGrid::new(1, 32).unwrap();
        let ws = SpectralWorkspace::new(grid);
        let d = DiffusionTable::uniform(2, 1.0).unwrap();
        let c_bar = [1.0, 1.0];
        let eps = 0.01;
        let c_tilde = SpeciesField::from_fn(grid, 2, |i, x: &[f64]| {
            if i == 0 {
                x[0].sin()
            } else {
                -x[0].sin()
            }
        });
        let c = total_concentration(&c_bar, eps, &c_tilde);
        let u_orth = compute_orthogonal_velocity(&ws, &c, &d).unwrap();
        let u_bar = solenoidal_constant(grid, &[0.3]);
        let state = OrthogonalState::new(&ws, c.clone(), u_orth, u_bar.clone()).unwrap();
        let u = reconstruct_full_velocity(&state);
        let avg = molar_average_velocity(&c, &u);
        let err = avg
            .component(0)
            .zip_map(u_bar.component(0), |a, b| (a - b).abs())
            .max_abs();
        assert!(err <= 1e-12);
    }

    #[test]
    fn rhs_vanishes_at_equilibrium() {
        let (ws, d) = setup1d(32);
        let c_bar = [1.0, 1.0];
        let c_tilde = SpeciesField::zeros(ws.grid(), 2);
        let u_bar = VectorField::zeros(ws.grid());
        let rhs = rhs_orthogonal(&ws, &d, &c_bar, 1e-3, &c_tilde, &u_bar).unwrap();
        assert!(rhs.max_abs() <= 1e-14);
    }

    #[test]
    fn rhs_linearizes_to_single_mode_diffusion() {
        // Around a uniform state the single-mode fluctuation diffuses with
        // effective coefficient delta/C0: rhs ~ -(delta/C0) k^2 c_tilde.
        let (ws, d) = setup1d(64);
        let c_bar = [1.0, 1.0];
        let c0 = 2.0;
        let eps = 1e-4;
        let k = 1.0;
        let c_tilde = SpeciesField::from_fn(ws.grid(), 2, |i, x: &[f64]| {
            if i == 0 {
                (k * x[0]).sin()
            } else {
                -(k * x[0]).sin()
            }
        });
        let u_bar = VectorField::zeros(ws.grid());
        let rhs = rhs_orthogonal(&ws, &d, &c_bar, eps, &c_tilde, &u_bar).unwrap();
        let rate = 1.0 / c0 * k * k;
        for i in 0..2 {
            let err = rhs
                .species(i)
                .zip_map(c_tilde.species(i), |r, c| (r + rate * c).abs())
                .max_abs();
            assert!(err <= 1e-3 * rate, "species {i}: err {err:e}");
        }
    }

    #[test]
    fn rhs_species_sum_and_mean_vanish() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let ws = SpectralWorkspace::new(grid);
        let d = DiffusionTable::from_pairs(3, &[(0, 1, 1.0), (0, 2, 1.5), (1, 2, 0.8)]).unwrap();
        let c_bar = [1.0, 1.2, 0.9];
        let eps = 0.05;
        let c_tilde = {
            let mut f = SpeciesField::from_fn(grid, 3, |i, x: &[f64]| match i {
                0 => 0.3 * x[0].sin() + 0.1 * (x[1]).cos() - 0.1,
                1 => 0.2 * (x[0] + x[1]).cos() - 0.2 * (2.0 * x[1]).sin(),
                _ => 0.0,
            });
            // Zero the spatial means, then let the last species close the sum.
            for i in 0..2 {
                let avg = f.species(i).average();
                *f.species_mut(i) = f.species(i).map(|v| v - avg);
            }
            let s01 = f.species(0).zip_map(f.species(1), |a, b| a + b);
            *f.species_mut(2) = s01.scaled(-1.0);
            f
        };
        let psi = ScalarField::from_fn(grid, |x: &[f64]| 0.02 * x[0].sin() * x[1].sin());
        let u_bar = ws.solenoidal_from_stream(&psi);
        let rhs = rhs_orthogonal(&ws, &d, &c_bar, eps, &c_tilde, &u_bar).unwrap();
        assert!(rhs.max_species_sum() <= 1e-10, "{:e}", rhs.max_species_sum());
        assert!(rhs.max_mean_abs() <= 1e-10, "{:e}", rhs.max_mean_abs());
    }

    #[test]
    fn rejects_nonpositive_concentration() {
        let (ws, d) = setup1d(16);
        let c = SpeciesField::from_fn(ws.grid(), 2, |i, x: &[f64]| {
            if i == 0 {
                0.5 + x[0].sin()
            } else {
                2.0 - x[0].sin()
            }
        });
        assert!(matches!(
            compute_orthogonal_velocity(&ws, &c, &d),
            Err(CoreError::NonPositiveConcentration { .. })
        ));
    }

    #[test]
    fn rejects_non_orthogonal_gradient() {
        let (ws, d) = setup1d(16);
        // Species sum sin(x) is not constant, so the gradient has a
        // macroscopic ones-component.
        let c = SpeciesField::from_fn(ws.grid(), 2, |i, x: &[f64]| {
            if i == 0 {
                2.0 + x[0].sin()
            } else {
                2.0
            }
        });
        assert!(matches!(
            compute_orthogonal_velocity(&ws, &c, &d),
            Err(CoreError::GradientNotOrthogonal { .. })
        ));
    }
}
