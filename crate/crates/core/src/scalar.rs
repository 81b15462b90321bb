//! Scalar abstraction for the floating-point side of the pipeline.
//!
//! Histogram counts are always integers; everything downstream of them
//! (filterbank energies, codebook centroids, subspace bases, compressed
//! features, distances) is generic over a real scalar so the same code runs
//! in `f32` or `f64`. The crate root exports `f64` aliases for the common
//! case.

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar usable throughout the pipeline: `f32` or `f64`.
///
/// `nalgebra::RealField` is required for the eigendecompositions behind the
/// per-segment transforms; `num_traits::Float` covers everything else. Where
/// the two traits overlap (`sqrt`, `abs`, ...), call sites disambiguate via
/// `Float::...`.
pub trait Real:
    Float + FromPrimitive + NumAssign + nalgebra::RealField + Default + Copy + Send + Sync + 'static
{
    /// Lossless-enough conversion from `f64` constants and integer-derived
    /// values. Panics only if the scalar cannot represent any finite `f64`,
    /// which neither `f32` nor `f64` triggers.
    fn from_f64_lossy(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 must convert")
    }

    /// Conversion of an exact integer quantity (counts, squared distances).
    fn from_u64_lossy(value: u64) -> Self {
        Self::from_u64(value).expect("u64 must convert")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `sqrt(2)`, the per-step Lipschitz constant of sliding-window histograms.
pub fn sqrt2<F: Real>() -> F {
    F::from_f64_lossy(std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converts_in_both_widths() {
        assert_eq!(f32::from_f64_lossy(0.5), 0.5f32);
        assert_eq!(f64::from_u64_lossy(1 << 40), (1u64 << 40) as f64);
        assert!((sqrt2::<f32>() * sqrt2::<f32>() - 2.0).abs() < 1e-6);
    }
}
