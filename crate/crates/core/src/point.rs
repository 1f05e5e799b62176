use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bits::SeqPoint;
use crate::fixed::Fixed;

/// A point of one of the concrete spaces: the line or circle (a grid
/// coordinate) or binary-sequence space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Point {
    Real(Fixed),
    Seq(SeqPoint),
}

impl Point {
    pub fn real(x: f64) -> crate::Result<Point> {
        Fixed::from_f64(x).map(Point::Real)
    }

    pub fn as_real(&self) -> Option<Fixed> {
        match self {
            Point::Real(x) => Some(*x),
            Point::Seq(_) => None,
        }
    }

    pub fn as_seq(&self) -> Option<&SeqPoint> {
        match self {
            Point::Seq(s) => Some(s),
            Point::Real(_) => None,
        }
    }

    /// Equality as points of the space (sequence heads may differ in length).
    pub fn same_point(&self, other: &Point) -> bool {
        match (self, other) {
            (Point::Real(x), Point::Real(y)) => x == y,
            (Point::Seq(x), Point::Seq(y)) => x.same_sequence(y),
            _ => false,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Real(x) => write!(f, "{x}"),
            Point::Seq(s) => write!(f, "{s}"),
        }
    }
}
