//! Fourier pseudospectral operators on the torus grid.
//!
//! Fields are transformed axis by axis with complex FFTs; spectral
//! coefficients follow the convention `f(x) = sum_k fhat_k exp(i k.x)` with
//! integer wavenumbers, so derivatives are exact multiplications by `i k`.
//! The Nyquist mode is zeroed in odd-order derivatives to keep them real
//! and skew-adjoint on the grid.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::{ScalarField, SpeciesField, SpeciesVelocityField, TorusGrid, VectorField};
use crate::scalar::Real;

/// FFT plans and wavenumber tables for one grid.
pub struct SpectralWorkspace<T: Real> {
    grid: TorusGrid,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    /// Signed integer wavenumber for each index along an axis.
    wavenumbers: Vec<i64>,
}

impl<T: Real> SpectralWorkspace<T> {
    pub fn new(grid: TorusGrid) -> Self {
        let m = grid.points_per_axis();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let wavenumbers = (0..m)
            .map(|t| {
                if t <= m / 2 {
                    t as i64
                } else {
                    t as i64 - m as i64
                }
            })
            .collect();
        Self {
            grid,
            forward,
            inverse,
            wavenumbers,
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    /// 2/3-rule cutoff: modes with any `|k| > m/3` are discarded by
    /// [`Self::dealias`].
    pub fn dealias_cutoff(&self) -> i64 {
        (self.grid.points_per_axis() / 3) as i64
    }

    fn transform_axis(&self, buf: &mut [Complex<T>], axis: usize, fft: &Arc<dyn Fft<T>>) {
        let m = self.grid.points_per_axis();
        let n = self.grid.n_points();
        let stride = self.grid.stride(axis);
        let mut line = vec![Complex::new(T::zero(), T::zero()); m];
        let block = m * stride;
        let mut base_block = 0;
        while base_block < n {
            for offset in 0..stride {
                let base = base_block + offset;
                for t in 0..m {
                    line[t] = buf[base + t * stride];
                }
                fft.process(&mut line);
                for t in 0..m {
                    buf[base + t * stride] = line[t];
                }
            }
            base_block += block;
        }
    }

    /// Forward transform to Fourier coefficients (normalized).
    pub fn coefficients(&self, f: &ScalarField<T>) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = f
            .data()
            .iter()
            .map(|&v| Complex::new(v, T::zero()))
            .collect();
        for axis in 0..self.grid.dim() {
            self.transform_axis(&mut buf, axis, &self.forward);
        }
        let scale = T::one() / T::from_usize_lossy(self.grid.n_points());
        for v in buf.iter_mut() {
            *v = *v * scale;
        }
        buf
    }

    /// Inverse transform back to a real field (imaginary parts discarded).
    pub fn field_from_coefficients(&self, mut coeffs: Vec<Complex<T>>) -> ScalarField<T> {
        for axis in 0..self.grid.dim() {
            self.transform_axis(&mut coeffs, axis, &self.inverse);
        }
        let data = coeffs.into_iter().map(|v| v.re).collect();
        ScalarField::from_data(self.grid, data).expect("length preserved")
    }

    /// Integer wavenumber of flat spectral index `p` along `axis`.
    fn k_at(&self, idx: &[usize; crate::grid::MAX_DIM], axis: usize) -> i64 {
        self.wavenumbers[idx[axis]]
    }

    /// Mixed partial derivative `d^alpha f` for a per-axis order multi-index.
    pub fn partial(&self, f: &ScalarField<T>, alpha: &[usize]) -> ScalarField<T> {
        let dim = self.grid.dim();
        debug_assert_eq!(alpha.len(), dim);
        let m = self.grid.points_per_axis() as i64;
        let mut coeffs = self.coefficients(f);
        for p in 0..coeffs.len() {
            let idx = self.grid.unravel(p);
            let mut factor = Complex::new(T::one(), T::zero());
            for axis in 0..dim {
                let order = alpha[axis];
                if order == 0 {
                    continue;
                }
                let k = self.k_at(&idx, axis);
                if order % 2 == 1 && k == m / 2 {
                    factor = Complex::new(T::zero(), T::zero());
                    break;
                }
                let ik = Complex::new(T::zero(), T::from_f64_lossy(k as f64));
                for _ in 0..order {
                    factor *= ik;
                }
            }
            coeffs[p] *= factor;
        }
        self.field_from_coefficients(coeffs)
    }

    /// Spectral gradient.
    pub fn gradient(&self, f: &ScalarField<T>) -> VectorField<T> {
        let dim = self.grid.dim();
        let m = self.grid.points_per_axis() as i64;
        let coeffs = self.coefficients(f);
        let mut components = Vec::with_capacity(dim);
        for axis in 0..dim {
            let mut deriv = coeffs.clone();
            for p in 0..deriv.len() {
                let idx = self.grid.unravel(p);
                let k = self.k_at(&idx, axis);
                if k == m / 2 {
                    deriv[p] = Complex::new(T::zero(), T::zero());
                } else {
                    let kv = T::from_f64_lossy(k as f64);
                    deriv[p] = Complex::new(-deriv[p].im * kv, deriv[p].re * kv);
                }
            }
            components.push(self.field_from_coefficients(deriv));
        }
        VectorField::from_components(components).expect("dim components")
    }

    /// Spectral divergence.
    pub fn divergence(&self, v: &VectorField<T>) -> ScalarField<T> {
        let dim = self.grid.dim();
        let m = self.grid.points_per_axis() as i64;
        let n = self.grid.n_points();
        let mut acc = vec![Complex::new(T::zero(), T::zero()); n];
        for axis in 0..dim {
            let coeffs = self.coefficients(v.component(axis));
            for p in 0..n {
                let idx = self.grid.unravel(p);
                let k = self.k_at(&idx, axis);
                if k == m / 2 {
                    continue;
                }
                let kv = T::from_f64_lossy(k as f64);
                acc[p] += Complex::new(-coeffs[p].im * kv, coeffs[p].re * kv);
            }
        }
        self.field_from_coefficients(acc)
    }

    /// Sharp spectral truncation at the 2/3-rule cutoff.
    pub fn dealias(&self, f: &ScalarField<T>) -> ScalarField<T> {
        let cutoff = self.dealias_cutoff();
        let dim = self.grid.dim();
        let mut coeffs = self.coefficients(f);
        for p in 0..coeffs.len() {
            let idx = self.grid.unravel(p);
            for axis in 0..dim {
                if self.k_at(&idx, axis).abs() > cutoff {
                    coeffs[p] = Complex::new(T::zero(), T::zero());
                    break;
                }
            }
        }
        self.field_from_coefficients(coeffs)
    }

    pub fn dealias_species(&self, f: &SpeciesField<T>) -> SpeciesField<T> {
        f.map_species(|_, s| self.dealias(s))
    }

    pub fn dealias_velocity(&self, v: &SpeciesVelocityField<T>) -> SpeciesVelocityField<T> {
        SpeciesVelocityField::from_fields(
            (0..v.n_species())
                .map(|i| {
                    VectorField::from_components(
                        (0..self.grid.dim())
                            .map(|a| self.dealias(v.species(i).component(a)))
                            .collect(),
                    )
                    .expect("dim components")
                })
                .collect(),
        )
    }

    /// Sobolev multiplier `sum_{|alpha| <= s} k^(2 alpha)` at one spectral index.
    fn sobolev_weight(&self, idx: &[usize; crate::grid::MAX_DIM], s: usize) -> T {
        let dim = self.grid.dim();
        let mut k2 = [T::zero(); crate::grid::MAX_DIM];
        for axis in 0..dim {
            let k = T::from_f64_lossy(self.k_at(idx, axis) as f64);
            k2[axis] = k * k;
        }
        let mut total = T::zero();
        // Enumerate multi-indices with |alpha| <= s over the active axes.
        let s1 = s;
        for a0 in 0..=s1 {
            let p0 = k2[0].powi(a0 as i32);
            if dim == 1 {
                total += p0;
                continue;
            }
            for a1 in 0..=(s1 - a0) {
                let p1 = p0 * k2[1].powi(a1 as i32);
                if dim == 2 {
                    total += p1;
                    continue;
                }
                for a2 in 0..=(s1 - a0 - a1) {
                    total += p1 * k2[2].powi(a2 as i32);
                }
            }
        }
        total
    }

    /// Discrete Sobolev norm of one scalar field.
    pub fn sobolev_norm_scalar(&self, f: &ScalarField<T>, s: usize) -> T {
        self.sobolev_norm_sq_scalar(f, s).sqrt()
    }

    fn sobolev_norm_sq_scalar(&self, f: &ScalarField<T>, s: usize) -> T {
        let coeffs = self.coefficients(f);
        let mut acc = T::zero();
        for p in 0..coeffs.len() {
            let idx = self.grid.unravel(p);
            let w = self.sobolev_weight(&idx, s);
            acc += w * coeffs[p].norm_sqr();
        }
        acc * self.grid.volume::<T>()
    }

    /// Discrete Sobolev norm of a species field, with an optional per-species
    /// weight vector `w` (the norm squares carry `w_i^2`).
    pub fn sobolev_norm(&self, f: &SpeciesField<T>, s: usize, weight: Option<&[T]>) -> T {
        let mut acc = T::zero();
        for i in 0..f.n_species() {
            let wi = weight.map_or(T::one(), |w| w[i]);
            acc += wi * wi * self.sobolev_norm_sq_scalar(f.species(i), s);
        }
        acc.sqrt()
    }

    /// Sobolev norm of a species velocity field (summed over species and
    /// spatial directions).
    pub fn sobolev_norm_velocity(&self, v: &SpeciesVelocityField<T>, s: usize) -> T {
        let mut acc = T::zero();
        for i in 0..v.n_species() {
            for axis in 0..self.grid.dim() {
                acc += self.sobolev_norm_sq_scalar(v.species(i).component(axis), s);
            }
        }
        acc.sqrt()
    }

    /// Divergence-free field from a stream function (2-d):
    /// `(d_y psi, -d_x psi)`.
    pub fn solenoidal_from_stream(&self, psi: &ScalarField<T>) -> VectorField<T> {
        debug_assert_eq!(self.grid.dim(), 2);
        let g = self.gradient(psi);
        VectorField::from_components(vec![g.component(1).clone(), g.component(0).scaled(-T::one())])
            .expect("2 components")
    }

    /// Divergence-free field as the curl of a vector potential (3-d).
    pub fn solenoidal_from_potential(&self, a: &VectorField<T>) -> VectorField<T> {
        debug_assert_eq!(self.grid.dim(), 3);
        let g0 = self.gradient(a.component(0));
        let g1 = self.gradient(a.component(1));
        let g2 = self.gradient(a.component(2));
        let cx = g2.component(1).zip_map(g1.component(2), |a, b| a - b);
        let cy = g0.component(2).zip_map(g2.component(0), |a, b| a - b);
        let cz = g1.component(0).zip_map(g0.component(1), |a, b| a - b);
        VectorField::from_components(vec![cx, cy, cz]).expect("3 components")
    }
}

/// Divergence-free constant field (the only mean-free solenoidal family in 1-d,
/// valid in any dimension).
pub fn solenoidal_constant<T: Real>(grid: TorusGrid, values: &[T]) -> VectorField<T> {
    debug_assert_eq!(values.len(), grid.dim());
    VectorField::from_components(
        values
            .iter()
            .map(|&v| ScalarField::constant(grid, v))
            .collect(),
    )
    .expect("dim components")
}
