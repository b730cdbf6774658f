//! Dense linear algebra, initialization, optimization and gradient checking.
//!
//! Everything is generic over [`Scalar`] so training can run in `f32` while
//! gradient checks run the identical code path in `f64`.

mod adamw;
mod gradcheck;
mod init;
mod lora;
mod matrix;
mod params;
mod rng;

pub use adamw::{AdamW, AdamWConfig};
pub use gradcheck::{finite_diff_grad, relative_error};
pub use init::{fan_bound, init_params, InitScheme};
pub(crate) use init::init_params_stream;
pub use lora::{lora_adapt, LoraFactors};
pub use matrix::Matrix;
pub(crate) use matrix::{dot, outer_acc, vec_matmul, vec_matmul_t};
pub use params::ParamSet;
pub use rng::{stream, Stream};

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;

/// Floating-point element type used throughout the model.
pub trait Scalar:
    Float + Default + Debug + Display + Sum + Send + Sync + 'static
{
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}
