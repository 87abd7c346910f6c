//! Planar geometry.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// A point in the plane, coordinates in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[S; 2]", into = "[S; 2]")]
#[serde(bound(serialize = "S: Scalar + Serialize", deserialize = "S: Scalar + Deserialize<'de>"))]
pub struct Point<S: Scalar> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Point<S> {
    pub const fn new(x: S, y: S) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Self) -> S {
        distance(*self, *other)
    }

    pub fn cast<T: Scalar>(self) -> Point<T> {
        Point::new(T::lit(self.x.to_f64_lossy()), T::lit(self.y.to_f64_lossy()))
    }
}

impl<S: Scalar> From<[S; 2]> for Point<S> {
    fn from([x, y]: [S; 2]) -> Self {
        Self { x, y }
    }
}

impl<S: Scalar> From<Point<S>> for [S; 2] {
    fn from(p: Point<S>) -> Self {
        [p.x, p.y]
    }
}

/// Euclidean distance between two points.
pub fn distance<S: Scalar>(a: Point<S>, b: Point<S>) -> S {
    (a.x - b.x).hypot(a.y - b.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn verifier_axis_distance() {
        assert_eq!(distance(Point::new(0.0, 0.0), Point::new(0.0, 10.0)), 10.0);
    }

    #[test]
    fn identical_points() {
        assert_eq!(distance(Point::new(3.0, 4.0), Point::new(3.0, 4.0)), 0.0);
    }

    #[test]
    fn prover_at_minus_seven() {
        // sqrt(98) by hand: 9.899494936611665
        assert_abs_diff_eq!(distance(Point::new(0.0, 0.0), Point::new(-7.0, -7.0)), 9.8995, epsilon = 1e-4);
        assert_abs_diff_eq!(distance(Point::new(0.0f32, 0.0), Point::new(-7.0, -7.0)), 98f32.sqrt(), epsilon = 1e-6);
    }

    fn coord() -> impl Strategy<Value = f64> {
        -1.0e4..1.0e4
    }

    proptest! {
        #[test]
        fn symmetric_and_triangle(ax in coord(), ay in coord(), bx in coord(), by in coord(), cx in coord(), cy in coord()) {
            let (a, b, c) = (Point::new(ax, ay), Point::new(bx, by), Point::new(cx, cy));
            prop_assert_eq!(distance(a, b), distance(b, a));
            prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
        }
    }
}
