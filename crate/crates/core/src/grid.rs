//! Periodic uniform grid and field containers.
//!
//! The domain is the d-torus with side length `2*pi`, sampled on `m` points
//! per axis. Fields are flat row-major arrays; the last axis varies fastest.

use crate::error::{CoreError, Result};
use crate::scalar::Real;

pub const MAX_DIM: usize = 3;

/// Uniform periodic grid on the d-torus, d in {1,2,3}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    dim: usize,
    m: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, points_per_axis: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(CoreError::InvalidGrid {
                reason: format!("dim must be 1, 2 or 3, got {dim}"),
            });
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(CoreError::InvalidGrid {
                reason: format!(
                    "points per axis must be a power of two >= 8, got {points_per_axis}"
                ),
            });
        }
        Ok(Self {
            dim,
            m: points_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.m
    }

    pub fn n_points(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    /// Grid spacing `2*pi / m`.
    pub fn dx<T: Real>(&self) -> T {
        T::two_pi() / T::from_usize_lossy(self.m)
    }

    /// Volume of the domain, `(2*pi)^dim`.
    pub fn volume<T: Real>(&self) -> T {
        let mut v = T::one();
        for _ in 0..self.dim {
            v *= T::two_pi();
        }
        v
    }

    /// Stride of `axis` in the flat row-major layout.
    pub fn stride(&self, axis: usize) -> usize {
        self.m.pow((self.dim - 1 - axis) as u32)
    }

    /// Decomposes a flat index into per-axis indices.
    pub fn unravel(&self, mut p: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        for axis in (0..self.dim).rev() {
            idx[axis] = p % self.m;
            p /= self.m;
        }
        idx
    }

    /// Physical coordinates of flat index `p`.
    pub fn coords<T: Real>(&self, p: usize) -> [T; MAX_DIM] {
        let idx = self.unravel(p);
        let dx = self.dx::<T>();
        let mut x = [T::zero(); MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = dx * T::from_usize_lossy(idx[axis]);
        }
        x
    }
}

/// One real-valued field on a torus grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T: Real> {
    grid: TorusGrid,
    data: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            data: vec![T::zero(); grid.n_points()],
        }
    }

    pub fn constant(grid: TorusGrid, value: T) -> Self {
        Self {
            grid,
            data: vec![value; grid.n_points()],
        }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[T]) -> T) -> Self {
        let data = (0..grid.n_points())
            .map(|p| {
                let x = grid.coords::<T>(p);
                f(&x[..grid.dim()])
            })
            .collect();
        Self { grid, data }
    }

    pub fn from_data(grid: TorusGrid, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.n_points() {
            return Err(CoreError::DimensionMismatch {
                context: "scalar field data",
                expected: grid.n_points(),
                got: data.len(),
            });
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Average of the samples (not scaled by the volume).
    pub fn average(&self) -> T {
        let mut acc = T::zero();
        for &v in &self.data {
            acc += v;
        }
        acc / T::from_usize_lossy(self.data.len())
    }

    /// Integral over the torus: grid average times domain volume.
    pub fn mean_value(&self) -> T {
        self.average() * self.grid.volume::<T>()
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for &v in &self.data {
            if v.abs() > m {
                m = v.abs();
            }
        }
        m
    }

    /// Discrete L2 norm with the `(2*pi/m)^d` volume element.
    pub fn l2_norm(&self) -> T {
        let mut acc = T::zero();
        for &v in &self.data {
            acc += v * v;
        }
        let cell = self.grid.volume::<T>() / T::from_usize_lossy(self.grid.n_points());
        (acc * cell).sqrt()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        self.map(|v| v * alpha)
    }

    /// In-place `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }
}

/// A d-component vector field (one scalar field per spatial direction).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T: Real> {
    components: Vec<ScalarField<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn from_components(components: Vec<ScalarField<T>>) -> Result<Self> {
        let grid = components[0].grid();
        if components.len() != grid.dim() {
            return Err(CoreError::DimensionMismatch {
                context: "vector field components",
                expected: grid.dim(),
                got: components.len(),
            });
        }
        Ok(Self { components })
    }

    pub fn grid(&self) -> TorusGrid {
        self.components[0].grid()
    }

    pub fn component(&self, axis: usize) -> &ScalarField<T> {
        &self.components[axis]
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut ScalarField<T> {
        &mut self.components[axis]
    }

    pub fn components(&self) -> &[ScalarField<T>] {
        &self.components
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for c in &self.components {
            if c.max_abs() > m {
                m = c.max_abs();
            }
        }
        m
    }
}

/// N concentration-like scalar fields sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesField<T: Real> {
    species: Vec<ScalarField<T>>,
}

impl<T: Real> SpeciesField<T> {
    pub fn zeros(grid: TorusGrid, n_species: usize) -> Self {
        Self {
            species: (0..n_species).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn from_fields(species: Vec<ScalarField<T>>) -> Self {
        debug_assert!(!species.is_empty());
        Self { species }
    }

    pub fn from_fn(
        grid: TorusGrid,
        n_species: usize,
        f: impl Fn(usize, &[T]) -> T,
    ) -> Self {
        let species = (0..n_species)
            .map(|i| ScalarField::from_fn(grid, |x| f(i, x)))
            .collect();
        Self { species }
    }

    pub fn grid(&self) -> TorusGrid {
        self.species[0].grid()
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self, i: usize) -> &ScalarField<T> {
        &self.species[i]
    }

    pub fn species_mut(&mut self, i: usize) -> &mut ScalarField<T> {
        &mut self.species[i]
    }

    /// Writes the N-vector at flat point `p` into `buf`.
    pub fn point_into(&self, p: usize, buf: &mut [T]) {
        for (i, s) in self.species.iter().enumerate() {
            buf[i] = s.data()[p];
        }
    }

    /// Pointwise sum over species.
    pub fn sum_over_species(&self) -> ScalarField<T> {
        let grid = self.grid();
        let mut out = ScalarField::zeros(grid);
        for s in &self.species {
            out.axpy(T::one(), s);
        }
        out
    }

    pub fn map_species(&self, f: impl Fn(usize, &ScalarField<T>) -> ScalarField<T>) -> Self {
        Self {
            species: self
                .species
                .iter()
                .enumerate()
                .map(|(i, s)| f(i, s))
                .collect(),
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        self.map_species(|_, s| s.scaled(alpha))
    }

    /// In-place `self += alpha * other`, species by species.
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        debug_assert_eq!(self.n_species(), other.n_species());
        for (a, b) in self.species.iter_mut().zip(&other.species) {
            a.axpy(alpha, b);
        }
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for s in &self.species {
            if s.max_abs() > m {
                m = s.max_abs();
            }
        }
        m
    }

    /// Largest pointwise |sum over species|.
    pub fn max_species_sum(&self) -> T {
        self.sum_over_species().max_abs()
    }

    /// Largest per-species |spatial mean|.
    pub fn max_mean_abs(&self) -> T {
        let mut m = T::zero();
        for s in &self.species {
            let v = s.average().abs();
            if v > m {
                m = v;
            }
        }
        m
    }
}

/// One vector field per species (velocities).
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesVelocityField<T: Real> {
    species: Vec<VectorField<T>>,
}

impl<T: Real> SpeciesVelocityField<T> {
    pub fn zeros(grid: TorusGrid, n_species: usize) -> Self {
        Self {
            species: (0..n_species).map(|_| VectorField::zeros(grid)).collect(),
        }
    }

    pub fn from_fields(species: Vec<VectorField<T>>) -> Self {
        debug_assert!(!species.is_empty());
        Self { species }
    }

    /// Broadcasts one common vector field to all species.
    pub fn broadcast(v: &VectorField<T>, n_species: usize) -> Self {
        Self {
            species: (0..n_species).map(|_| v.clone()).collect(),
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.species[0].grid()
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self, i: usize) -> &VectorField<T> {
        &self.species[i]
    }

    pub fn species_mut(&mut self, i: usize) -> &mut VectorField<T> {
        &mut self.species[i]
    }

    /// The N scalar fields of one spatial direction, viewed as a species field.
    pub fn axis_components(&self, axis: usize) -> SpeciesField<T> {
        SpeciesField::from_fields(
            self.species
                .iter()
                .map(|v| v.component(axis).clone())
                .collect(),
        )
    }

    /// Writes the N-vector of direction `axis` at point `p` into `buf`.
    pub fn point_into(&self, axis: usize, p: usize, buf: &mut [T]) {
        for (i, v) in self.species.iter().enumerate() {
            buf[i] = v.component(axis).data()[p];
        }
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for s in &self.species {
            if s.max_abs() > m {
                m = s.max_abs();
            }
        }
        m
    }
}
