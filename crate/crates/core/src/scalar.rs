//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar the simulator and analyses are generic over.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Tolerance used when validating density matrices.
    const STATE_TOL: Self;

    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f32 {
    const STATE_TOL: Self = 1e-5;
}

impl Real for f64 {
    const STATE_TOL: Self = 1e-10;
}

pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn cis<T: Real>(angle: T) -> C<T> {
    Complex::new(angle.cos(), angle.sin())
}
