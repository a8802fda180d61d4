//! Numeric traits the similarity, matching and metric code is generic over.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num};

/// Floating-point scalar used for similarities, graph weights and metrics.
pub trait Scalar: Float + FromPrimitive + Debug + Default + Send + Sync + 'static {
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + Debug + Default + Send + Sync + 'static {}

/// Edge weight accepted by the matcher.
///
/// Only ordered ring operations are needed, so exact types such as
/// `num_rational::Ratio<i64>` work alongside `f32` and `f64`.
pub trait Weight: Num + Copy + PartialOrd + Debug {}

impl<T> Weight for T where T: Num + Copy + PartialOrd + Debug {}
