//! Scalar abstraction for the math modules.

/// Floating-point scalar usable throughout the kinematics, dynamics, and
/// control code.
///
/// Implemented for `f32` and `f64`. The bound combines nalgebra's
/// [`RealField`](nalgebra::RealField) (elementary functions, constants) with
/// num-traits' primitive conversions so configuration constants written as
/// `f64` literals can be lowered into the working precision.
pub trait Real:
    nalgebra::RealField + Copy + num_traits::FromPrimitive + num_traits::ToPrimitive
{
    /// Converts an `f64` constant into this scalar type (possibly rounding).
    #[inline]
    fn scalar(v: f64) -> Self {
        Self::from_f64(v).expect("constant must be representable")
    }

    /// Widens this value to `f64` (exact for f32/f64).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar must widen to f64")
    }

    /// Sign function with `sgn(0) = 0`.
    #[inline]
    fn sgn(self) -> Self {
        if self > Self::zero() {
            Self::one()
        } else if self < Self::zero() {
            -Self::one()
        } else {
            Self::zero()
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}
