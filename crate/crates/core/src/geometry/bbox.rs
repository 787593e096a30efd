use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::GeometryError;
use crate::real::Real;

/// Axis-aligned box in pixel coordinates, origin top-left.
///
/// Serialized as `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T: Real = f64> {
    pub x_min: T,
    pub y_min: T,
    pub x_max: T,
    pub y_max: T,
}

impl<T: Real> BBox<T> {
    pub fn new(x_min: T, y_min: T, x_max: T, y_max: T) -> Result<Self, GeometryError> {
        let all_finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !all_finite || x_max < x_min || y_max < y_min {
            return Err(GeometryError::InvalidBox(format!(
                "[{x_min}, {y_min}, {x_max}, {y_max}]"
            )));
        }
        Ok(BBox { x_min, y_min, x_max, y_max })
    }

    pub fn from_array(v: [T; 4]) -> Result<Self, GeometryError> {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn width(&self) -> T {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> T {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn intersection_area(&self, other: &Self) -> T {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= T::zero() || h <= T::zero() {
            T::zero()
        } else {
            w * h
        }
    }

    /// Intersection over union; 0 when the union is empty.
    pub fn iou(&self, other: &Self) -> T {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= T::zero() {
            T::zero()
        } else {
            (inter / union).min(T::one())
        }
    }

    /// True when the box lies within `[0, width] x [0, height]`.
    pub fn fits_within(&self, height: u32, width: u32) -> bool {
        self.x_min >= T::zero()
            && self.y_min >= T::zero()
            && self.x_max <= T::from_u32(width).unwrap()
            && self.y_max <= T::from_u32(height).unwrap()
    }

    pub fn cast<U: Real>(&self) -> BBox<U> {
        BBox {
            x_min: U::lit(self.x_min.to_f64_lossy()),
            y_min: U::lit(self.y_min.to_f64_lossy()),
            x_max: U::lit(self.x_max.to_f64_lossy()),
            y_max: U::lit(self.y_max.to_f64_lossy()),
        }
    }
}

/// Analytic box IoU.
pub fn box_iou<T: Real>(a: &BBox<T>, b: &BBox<T>) -> T {
    a.iou(b)
}

impl<T: Real + Serialize> Serialize for BBox<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(serializer)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for BBox<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = <[T; 4]>::deserialize(deserializer)?;
        BBox::from_array(raw).map_err(serde::de::Error::custom)
    }
}
