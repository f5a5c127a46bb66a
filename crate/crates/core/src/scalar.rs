//! Scalar abstraction shared by every module.

use nalgebra::{ComplexField, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the library is generic over. Implemented for `f32` and `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + std::fmt::Debug {
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }

    /// Converts a count or index.
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    /// Machine epsilon of the type.
    fn machine_eps() -> Self {
        <Self as approx::AbsDiffEq>::default_epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over the library scalar.
pub type C<T> = Complex<T>;

pub fn c<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(T::lit(re), T::lit(im))
}

pub fn abs<T: Real>(z: C<T>) -> T {
    ComplexField::modulus(z)
}

pub fn abs2<T: Real>(z: C<T>) -> T {
    z.re * z.re + z.im * z.im
}

pub fn cexp<T: Real>(z: C<T>) -> C<T> {
    ComplexField::exp(z)
}

pub fn csqrt<T: Real>(z: C<T>) -> C<T> {
    ComplexField::sqrt(z)
}

pub fn cln<T: Real>(z: C<T>) -> C<T> {
    ComplexField::ln(z)
}

/// Principal argument in `(-pi, pi]`.
pub fn arg<T: Real>(z: C<T>) -> T {
    z.im.atan2(z.re)
}

/// Argument measured in `[0, 2pi)`.
pub fn arg_positive<T: Real>(z: C<T>) -> T {
    let a = arg(z);
    if a < T::zero() {
        a + T::two_pi()
    } else {
        a
    }
}

pub fn i_unit<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::one())
}

pub fn from_real<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

/// Converts between scalar types.
pub fn cast<T: Real, U: Real>(z: C<T>) -> C<U> {
    Complex::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64()))
}
