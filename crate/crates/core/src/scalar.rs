use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar the numeric kernels are generic over.
///
/// `f64` is what the CLI and the file formats use (see [`crate::Float`]);
/// `f32` is available for memory-bound experiments.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossless conversion from an integer count.
    fn from_count(count: u64) -> Self {
        Self::from_u64(count).expect("count representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
