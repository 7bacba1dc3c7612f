use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the whole crate is written against: `f32` or `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

pub type Cplx<T> = Complex<T>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal not representable")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("value not representable as f64")
}

#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("index not representable")
}

#[inline]
pub fn cr<T: Real>(re: T) -> Cplx<T> {
    Complex::new(re, T::zero())
}

/// e^{-i phi}
#[inline]
pub fn cis_neg<T: Real>(phi: T) -> Cplx<T> {
    Complex::new(phi.cos(), -phi.sin())
}

pub fn max_abs<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    xs.into_iter().fold(T::zero(), |m, x| m.max(x.abs()))
}
