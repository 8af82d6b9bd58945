//! Scalar abstraction: the solver is generic over the floating-point type.

use std::fmt;

/// Floating-point scalar usable throughout the solver.
///
/// Bundles the algebraic surface of [`nalgebra::RealField`] (dense solves)
/// with [`rustfft::FftNum`] (spectral transforms). Implemented for `f32`
/// and `f64`; the tolerances quoted in the documentation assume `f64`.
pub trait Real: nalgebra::RealField + rustfft::FftNum + fmt::Display + fmt::LowerExp + Copy {
    /// Lossy conversion from `f64`, for literals and configuration values.
    fn from_f64_lossy(v: f64) -> Self {
        num_traits::FromPrimitive::from_f64(v).expect("f64 literal not representable")
    }

    /// Conversion from `usize` counters (grid sizes, species counts).
    fn from_usize_lossy(v: usize) -> Self {
        num_traits::FromPrimitive::from_usize(v).expect("usize not representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
