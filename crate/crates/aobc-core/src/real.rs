//! Scalar abstraction for the numeric core.
//!
//! Everything that touches geometry, success probabilities or age statistics is
//! generic over [`Real`] so the same code runs in `f32` or `f64`. The trait
//! also owns the two primitive random draws the simulator needs (a unit uniform
//! and a unit-mean exponential), which keeps `rand` trait bounds out of every
//! signature downstream.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FloatConst, FromPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardUniform};

/// Floating scalar used throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + AddAssign
    + Sum<Self>
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant. Exact for `f64`, rounded for `f32`.
    fn lit(x: f64) -> Self;

    /// Converts a count. Counts in this crate stay far below 2^52.
    fn from_count(n: usize) -> Self;

    /// Widens to `f64` (used at reporting boundaries, never in hot math).
    fn widen(self) -> f64;

    /// One sample of U[0, 1).
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One sample of a unit-mean exponential (Rayleigh-faded power gain).
    fn sample_exp1<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn from_count(n: usize) -> Self {
                n as $t
            }

            #[inline]
            fn widen(self) -> f64 {
                self as f64
            }

            #[inline]
            fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardUniform.sample(rng)
            }

            #[inline]
            fn sample_exp1<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Exp1.sample(rng)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);
