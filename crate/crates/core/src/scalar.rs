//! Scalar abstraction: all numerical kernels are generic over [`Real`],
//! instantiated as `f64` in the concrete aliases at the crate root.

use std::fmt::{Debug, Display};
use std::iter::{Product, Sum};

/// Floating-point scalar usable by every kernel in this crate.
///
/// `f32` satisfies the bound and is exercised by a smoke test, but the
/// documented tolerances throughout assume `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssign
    + Sum
    + Product
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// π for this scalar type.
    fn pi() -> Self {
        r64(std::f64::consts::PI)
    }

    /// 2π.
    fn two_pi() -> Self {
        r64(2.0 * std::f64::consts::PI)
    }

    /// 4π (the area of the unit sphere; ubiquitous in the Green's-function
    /// normalisation).
    fn four_pi() -> Self {
        r64(4.0 * std::f64::consts::PI)
    }
}

impl<T> Real for T where
    T: num_traits::Float
        + num_traits::FromPrimitive
        + num_traits::ToPrimitive
        + num_traits::NumAssign
        + Sum
        + Product
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Convert an `f64` constant into the working scalar.
#[inline]
pub fn r64<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("f64 constant must convert into the scalar type")
}

/// Convert a `usize` (loop counts, mode indices) into the working scalar.
#[inline]
pub fn rus<R: Real>(n: usize) -> R {
    R::from_usize(n).expect("usize must convert into the scalar type")
}

/// Euler–Mascheroni constant γ.
#[inline]
pub fn euler_gamma<R: Real>() -> R {
    r64(0.577_215_664_901_532_9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_reachable_in_f32_and_f64() {
        assert!((f64::pi() - std::f64::consts::PI).abs() < 1e-15);
        assert!((f32::two_pi() - 2.0 * std::f32::consts::PI).abs() < 1e-6);
        let x: f64 = r64(1.5);
        assert_eq!(x, 1.5);
    }
}
