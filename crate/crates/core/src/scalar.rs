//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the engine is generic over.
///
/// Implemented for `f32` and `f64`. Desk-scale experiments and all
/// finite-difference checks run in `f64`; `f32` is supported for
/// throughput-oriented forward passes.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    /// Converts a count or index into this scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Logistic function, evaluated without overflow for large |x|.
    #[inline]
    fn sigmoid(self) -> Self {
        if self >= Self::zero() {
            Self::one() / (Self::one() + (-self).exp())
        } else {
            let e = self.exp();
            e / (Self::one() + e)
        }
    }

    /// Inverse of [`Scalar::sigmoid`] on (0, 1).
    #[inline]
    fn logit(self) -> Self {
        (self / (Self::one() - self)).ln()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(Scalar::sigmoid(0.0f64), 0.5);
        assert!(Scalar::sigmoid(-800.0f64) >= 0.0);
        assert_eq!(Scalar::sigmoid(800.0f64), 1.0);
        assert!(Scalar::sigmoid(30.0f32).is_finite());
    }

    #[test]
    fn logit_inverts_sigmoid() {
        for &x in &[-4.0f64, -0.3, 0.0, 1.7, 5.0] {
            assert!((Scalar::logit(Scalar::sigmoid(x)) - x).abs() < 1e-12);
        }
    }
}
