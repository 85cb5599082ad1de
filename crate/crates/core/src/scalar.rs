//! Scalar abstraction: the simulator math is written once over [`Real`] and
//! instantiated at `f32` or `f64`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, Uniform};

/// Real scalar type usable throughout the simulator: float arithmetic plus
/// the random draws the channel models need.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + AddAssign
    + Sum<Self>
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Draw from Gamma(shape, scale).
    fn gamma_sample<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self;

    /// Draw from Uniform[lo, hi).
    fn uniform_sample<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self;

    /// Draw a standard normal.
    fn normal_sample<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Lossy conversion from `f64`; panics only for non-finite edge cases
    /// that cannot be represented.
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 not representable in scalar type")
    }

    fn of_usize(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize not representable in scalar type")
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn gamma_sample<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self {
                Gamma::<$t>::new(shape, scale)
                    .expect("invalid gamma parameters")
                    .sample(rng)
            }

            fn uniform_sample<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self {
                Uniform::<$t>::new(lo, hi)
                    .expect("invalid uniform range")
                    .sample(rng)
            }

            fn normal_sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);
