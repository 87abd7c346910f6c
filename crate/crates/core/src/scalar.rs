//! Scalar abstraction for the numeric parts of the toolkit.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point scalar: f32 or f64.
pub trait Scalar: Float + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an f64 literal, panicking only for values the type cannot hold at all.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Speed of light in vacuum, m/s (exact by definition of the metre).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Absolute tolerance for timing comparisons in ideal-channel runs, seconds.
pub const EPS_TIME: f64 = 1e-12;

/// Absolute tolerance for distance comparisons in ideal-channel runs, metres.
pub const EPS_DISTANCE: f64 = 1e-6;

/// Default cross-check detection threshold, metres.
pub const EPS_DETECT: f64 = 3.0 * EPS_DISTANCE;
