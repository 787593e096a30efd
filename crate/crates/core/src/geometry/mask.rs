//! Row-major run-length encoded binary masks.
//!
//! Runs alternate background/foreground and always start with a
//! background run, which may be zero.

use serde::{Deserialize, Serialize};

use super::{BBox, GeometryError};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawMask")]
pub struct RasterMask {
    height: u32,
    width: u32,
    runs: Vec<u32>,
}

#[derive(Deserialize)]
struct RawMask {
    height: u32,
    width: u32,
    runs: Vec<u32>,
}

impl TryFrom<RawMask> for RasterMask {
    type Error = GeometryError;

    fn try_from(raw: RawMask) -> Result<Self, Self::Error> {
        RasterMask::from_runs(raw.height, raw.width, raw.runs)
    }
}

impl RasterMask {
    pub fn from_runs(height: u32, width: u32, runs: Vec<u32>) -> Result<Self, GeometryError> {
        if height == 0 || width == 0 {
            return Err(GeometryError::InvalidMask(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if runs.is_empty() {
            return Err(GeometryError::InvalidMask("empty run list".into()));
        }
        if let Some(pos) = runs.iter().skip(1).position(|&r| r == 0) {
            return Err(GeometryError::InvalidMask(format!("run {} is zero", pos + 1)));
        }
        let total: u64 = runs.iter().map(|&r| u64::from(r)).sum();
        let expected = u64::from(height) * u64::from(width);
        if total != expected {
            return Err(GeometryError::InvalidMask(format!(
                "runs sum to {total}, expected {expected}"
            )));
        }
        Ok(RasterMask { height, width, runs })
    }

    pub fn empty(height: u32, width: u32) -> Self {
        assert!(height > 0 && width > 0, "mask dimensions must be positive");
        RasterMask { height, width, runs: vec![height * width] }
    }

    /// Encodes a row-major bitmap.
    pub fn from_bitmap(height: u32, width: u32, pixels: &[bool]) -> Result<Self, GeometryError> {
        let expected = height as usize * width as usize;
        if height == 0 || width == 0 || pixels.len() != expected {
            return Err(GeometryError::InvalidMask(format!(
                "bitmap of {} pixels does not match {height}x{width}",
                pixels.len()
            )));
        }
        let mut runs = Vec::new();
        let mut current = false;
        let mut count = 0u32;
        for &p in pixels {
            if p == current {
                count += 1;
            } else {
                runs.push(count);
                current = p;
                count = 1;
            }
        }
        runs.push(count);
        Ok(RasterMask { height, width, runs })
    }

    pub fn to_bitmap(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.pixel_count());
        for (i, &r) in self.runs.iter().enumerate() {
            out.extend(std::iter::repeat_n(i % 2 == 1, r as usize));
        }
        out
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    pub fn pixel_count(&self) -> usize {
        self.height as usize * self.width as usize
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).map(|&r| u64::from(r)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    /// Foreground spans as half-open `[start, end)` offsets into the
    /// row-major pixel array.
    pub fn foreground_spans(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let mut offset = 0u64;
        self.runs.iter().enumerate().filter_map(move |(i, &r)| {
            let start = offset;
            offset += u64::from(r);
            (i % 2 == 1).then_some((start, offset))
        })
    }

    pub fn intersection_area(&self, other: &RasterMask) -> Result<u64, GeometryError> {
        self.check_same_shape(other)?;
        let a: Vec<_> = self.foreground_spans().collect();
        let b: Vec<_> = other.foreground_spans().collect();
        let (mut i, mut j, mut total) = (0, 0, 0u64);
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if hi > lo {
                total += hi - lo;
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Ok(total)
    }

    /// Pixel-count IoU; 0 when both masks are empty.
    pub fn iou<T: Real>(&self, other: &RasterMask) -> Result<T, GeometryError> {
        let inter = self.intersection_area(other)?;
        let union = self.area() + other.area() - inter;
        if union == 0 {
            return Ok(T::zero());
        }
        Ok(T::lit(inter as f64) / T::lit(union as f64))
    }

    /// Tight pixel-edge bounding box of the foreground, if any.
    pub fn bounding_box<T: Real>(&self) -> Option<BBox<T>> {
        let w = u64::from(self.width);
        let (mut r0, mut r1, mut c0, mut c1) = (u64::MAX, 0u64, u64::MAX, 0u64);
        for (start, end) in self.foreground_spans() {
            let last = end - 1;
            r0 = r0.min(start / w);
            r1 = r1.max(last / w);
            if start / w == last / w {
                c0 = c0.min(start % w);
                c1 = c1.max(last % w);
            } else {
                // a span crossing a row boundary touches both image edges
                c0 = 0;
                c1 = w - 1;
            }
        }
        if r0 == u64::MAX {
            return None;
        }
        let f = |v: u64| T::lit(v as f64);
        Some(BBox { x_min: f(c0), y_min: f(r0), x_max: f(c1 + 1), y_max: f(r1 + 1) })
    }

    fn check_same_shape(&self, other: &RasterMask) -> Result<(), GeometryError> {
        if self.height != other.height || self.width != other.width {
            return Err(GeometryError::ShapeMismatch {
                left: (self.height, self.width),
                right: (other.height, other.width),
            });
        }
        Ok(())
    }
}

/// Pixel-count IoU of two equally sized masks.
pub fn mask_iou<T: Real>(a: &RasterMask, b: &RasterMask) -> Result<T, GeometryError> {
    a.iou(b)
}
