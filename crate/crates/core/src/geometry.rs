//! Axis-aligned pixel boxes and the handful of measurements the prompt
//! builder and the baseline need.
//!
//! Image convention: x grows to the right, y grows downward, origin at the
//! top-left corner. Coordinates are kept at whatever precision they were
//! ingested with.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("bounding box coordinate {name} = {value} is not finite")]
    NonFinite { name: &'static str, value: f64 },
    #[error("bounding box coordinate {name} = {value} is negative")]
    Negative { name: &'static str, value: f64 },
    #[error("bounding box is inverted: {low_name} = {low} > {high_name} = {high}")]
    Inverted {
        low_name: &'static str,
        low: f64,
        high_name: &'static str,
        high: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub fn distance(self, other: Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Box given as `(x1, y1, x2, y2)` = (left, top, right, bottom) in pixels.
///
/// Serialized as the four-element array `[x1, y1, x2, y2]`. Degenerate boxes
/// (zero width or height) are allowed and behave like segments or points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        for (name, value) in [("x1", x1), ("y1", y1), ("x2", x2), ("y2", y2)] {
            if !value.is_finite() {
                return Err(GeometryError::NonFinite { name, value });
            }
            if value < 0.0 {
                return Err(GeometryError::Negative { name, value });
            }
        }
        if x1 > x2 {
            return Err(GeometryError::Inverted {
                low_name: "x1",
                low: x1,
                high_name: "x2",
                high: x2,
            });
        }
        if y1 > y2 {
            return Err(GeometryError::Inverted {
                low_name: "y1",
                low: y1,
                high_name: "y2",
                high: y2,
            });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn center(&self) -> Point2D {
        Point2D {
            x: (self.x1 + self.x2) / 2.0,
            y: (self.y1 + self.y2) / 2.0,
        }
    }

    /// Boundary-inclusive point test.
    pub fn contains_point(&self, p: Point2D) -> bool {
        self.x1 <= p.x && p.x <= self.x2 && self.y1 <= p.y && p.y <= self.y2
    }

    /// Whether `member`'s center falls inside this box (edges count as inside).
    pub fn contains_center(&self, member: &BoundingBox) -> bool {
        self.contains_point(member.center())
    }

    /// Euclidean distance between the two centers.
    pub fn center_distance(&self, other: &BoundingBox) -> f64 {
        self.center().distance(other.center())
    }

    /// Strict interior overlap; boxes that only share an edge do not overlap.
    pub fn overlaps(&self, other: &BoundingBox) -> bool {
        self.x1 < other.x2 && other.x1 < self.x2 && self.y1 < other.y2 && other.y1 < self.y2
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = GeometryError;

    fn try_from([x1, y1, x2, y2]: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(x1, y1, x2, y2)
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.coords()
    }
}

pub fn center(b: &BoundingBox) -> Point2D {
    b.center()
}

pub fn contains_center(container: &BoundingBox, member: &BoundingBox) -> bool {
    container.contains_center(member)
}

pub fn center_distance(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.center_distance(b)
}
