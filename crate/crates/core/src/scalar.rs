//! Scalar abstractions.
//!
//! Two families are used across the crate. [`Real`] covers the IEEE float
//! types the attention model and the soft assignment matrices run on.
//! [`CostScalar`] is looser: anything with exact ordered arithmetic can
//! drive the min-cost flow solver, including `num_rational::Ratio`, which
//! the tests use to check optimality and tie-breaking without rounding.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// Floating-point scalar used by the model and soft assignments.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite float")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Ordered scalar for edge costs.
pub trait CostScalar: Num + Signed + PartialOrd + Clone + Debug + Send + Sync {
    /// Whether the value can be used as an edge cost (floats: finite).
    fn is_admissible(&self) -> bool;

    /// Slack allowed when comparing two objective values of the given
    /// magnitude. Zero for exact types.
    fn slack(magnitude: &Self) -> Self;

    fn near_eq(&self, other: &Self) -> bool {
        let mag = if self.abs() > other.abs() {
            self.abs()
        } else {
            other.abs()
        };
        (self.clone() - other.clone()).abs() <= Self::slack(&mag)
    }

    fn to_f64_lossy(&self) -> f64;
}

macro_rules! float_cost {
    ($t:ty) => {
        impl CostScalar for $t {
            fn is_admissible(&self) -> bool {
                self.is_finite()
            }

            fn slack(magnitude: &Self) -> Self {
                <$t>::EPSILON * 64.0 * magnitude.abs().max(1.0)
            }

            fn to_f64_lossy(&self) -> f64 {
                *self as f64
            }
        }
    };
}

float_cost!(f32);
float_cost!(f64);

impl<I> CostScalar for Ratio<I>
where
    I: Integer + Signed + Clone + Debug + Send + Sync + ToPrimitive,
{
    fn is_admissible(&self) -> bool {
        true
    }

    fn slack(_magnitude: &Self) -> Self {
        Ratio::from_integer(I::zero())
    }

    fn to_f64_lossy(&self) -> f64 {
        self.numer().to_f64().unwrap_or(f64::NAN) / self.denom().to_f64().unwrap_or(f64::NAN)
    }
}
