use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the numerical modules are generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + FromStr + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; the numerical code only feeds it values
    /// that are finite in `f64`.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal fits the scalar type")
    }

    fn of_usize(v: usize) -> Self {
        Self::of(v as f64)
    }

    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
