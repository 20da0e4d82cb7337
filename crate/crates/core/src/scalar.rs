//! Scalar abstraction the whole crate is generic over.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rustfft::FftNum;
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Floating-point scalar for grids, particles and spectra.
///
/// `FftNum` supplies what the FFT kernels need (and is implemented for f32 and
/// f64); the num-traits bounds supply constants, conversions and arithmetic.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + FftNum + Sum<Self> + Display + LowerExp + Debug
{
    /// Converts an f64 literal into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal converts to every supported scalar")
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssign
        + FftNum
        + Sum<Self>
        + Display
        + LowerExp
        + Debug
{
}

/// Complex number over the crate scalar.
pub type Cplx<T> = num_complex::Complex<T>;
