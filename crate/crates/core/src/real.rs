//! Floating-point abstraction shared by the transforms and the network.
//!
//! Everything numeric is generic over [`Real`] so the same code runs in `f64`
//! (oracles, gradient checks, training) and `f32` (fast inference).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, NumAssign};

pub use num_complex::Complex;

pub trait Real:
    Float
    + FloatConst
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + NumAssign
    + 'static
{
    /// Name used in manifests and reports.
    const NAME: &'static str;

    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Real for f64 {
    const NAME: &'static str = "float64";

    #[inline(always)]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    const NAME: &'static str = "float32";

    #[inline(always)]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

/// Lossy conversion of a slice between precisions.
pub fn cast_slice<A: Real, B: Real>(xs: &[A]) -> Vec<B> {
    xs.iter().map(|&x| B::lit(x.as_f64())).collect()
}

pub fn cast_complex<A: Real, B: Real>(xs: &[Complex<A>]) -> Vec<Complex<B>> {
    xs.iter()
        .map(|z| Complex::new(B::lit(z.re.as_f64()), B::lit(z.im.as_f64())))
        .collect()
}

/// Relative L2 difference `‖a − b‖ / ‖a‖`, computed in `f64`.
pub fn relative_l2<T: Real>(a: &[T], b: &[T]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x.as_f64(), y.as_f64());
        num += (x - y) * (x - y);
        den += x * x;
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
