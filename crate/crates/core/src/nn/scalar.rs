//! Floating-point scalar abstraction.
//!
//! The network runs in `f32` by default; `f64` is used by the
//! gradient-checking path. Metrics always accumulate in `f64` regardless
//! of the model precision.

use num_traits::Float;
use std::fmt::Debug;

pub trait Scalar: Float + Debug + Send + Sync + 'static {
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
    /// Gauss error function, used by the exact (erf-based) GELU.
    fn erf(self) -> Self;
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn erf(self) -> Self {
        // evaluate in double precision; the f32 rounding happens once
        libm::erf(self as f64) as f32
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn erf(self) -> Self {
        libm::erf(self)
    }
}
