//! Minimal neural-network toolkit: flat parameter storage, locally-connected
//! and periodic-convolution layers with hand-written reverse-mode gradients,
//! Adam, and a finite-difference gradient checker.
//!
//! Everything is generic over [`Scalar`] so training runs in `f32` while
//! gradient checks run in `f64`.

pub mod adam;
pub mod gradcheck;
pub mod layers;
pub mod params;

/// Floating-point element type for network parameters and activations.
pub trait Scalar:
    num_traits::Float
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + Default
    + std::fmt::Debug
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    /// Named to avoid clashing with `num_traits::ToPrimitive::to_f64`.
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
