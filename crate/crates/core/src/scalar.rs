//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All algorithms are written against [`Real`], with implementations for
//! `f32` and `f64`. The accuracy targets quoted in module docs (e.g. the
//! `1e-10` relative accuracy of the Bessel routines) assume `f64`.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal, StandardUniform};

pub trait Real:
    'static
    + Send
    + Sync
    + Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
{
    /// Converts an `f64` literal. Never fails for the supported types.
    fn lit(x: f64) -> Self;

    /// Absolute tolerance `base`, raised to `64·ε` when the type cannot resolve it.
    fn tol(base: f64) -> Self {
        Self::lit(base).max(Self::epsilon() * Self::lit(64.0))
    }

    fn from_usize_lossy(x: usize) -> Self {
        Self::lit(x as f64)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Natural log of the gamma function.
    fn ln_gamma(self) -> Self {
        Self::lit(statrs::function::gamma::ln_gamma(self.to_f64_lossy()))
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw on `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Beta distribution over this scalar type.
    type BetaDist: Clone + Debug + Send + Sync;

    fn beta_distribution(alpha: Self, beta: Self) -> Option<Self::BetaDist>;

    fn sample_beta<R: Rng + ?Sized>(dist: &Self::BetaDist, rng: &mut R) -> Self;
}

macro_rules! impl_real {
    ($ty:ty) => {
        impl Real for $ty {
            type BetaDist = Beta<$ty>;

            #[inline]
            fn lit(x: f64) -> Self {
                x as $ty
            }

            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardUniform.sample(rng)
            }

            fn beta_distribution(alpha: Self, beta: Self) -> Option<Beta<Self>> {
                Beta::new(alpha, beta).ok()
            }

            #[inline]
            fn sample_beta<R: Rng + ?Sized>(dist: &Beta<Self>, rng: &mut R) -> Self {
                dist.sample(rng)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

#[inline]
pub(crate) fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

#[inline]
pub(crate) fn norm<T: Real>(x: &[T]) -> T {
    dot(x, x).sqrt()
}
