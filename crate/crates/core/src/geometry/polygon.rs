use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{GeometryError, RasterMask};
use crate::real::Real;

/// Closed polygon in pixel coordinates, serialized as `[[x, y], ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon<T: Real = f64> {
    vertices: Vec<[T; 2]>,
}

impl<T: Real> Polygon<T> {
    pub fn new(vertices: Vec<[T; 2]>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidPolygon("non-finite vertex".into()));
        }
        Ok(Polygon { vertices })
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = ([T; 2], [T; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace signed area.
    pub fn signed_area(&self) -> T {
        let twice: T = self
            .edges()
            .map(|(a, b)| a[0] * b[1] - b[0] * a[1])
            .sum();
        twice / T::lit(2.0)
    }

    /// Even-odd containment; points on an edge count as inside.
    pub fn contains(&self, x: T, y: T) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if on_segment(a, b, x, y) {
                return true;
            }
            if (a[1] > y) != (b[1] > y) {
                let x_cross = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Pixel `(r, c)` is foreground iff its centre `(c + 0.5, r + 0.5)` is
    /// contained. Zero-area polygons rasterize to an empty mask.
    pub fn rasterize(&self, height: u32, width: u32) -> RasterMask {
        if self.signed_area() == T::zero() {
            return RasterMask::empty(height, width);
        }
        let half = T::lit(0.5);
        let (mut x_min, mut x_max, mut y_min, mut y_max) = (T::infinity(), T::neg_infinity(), T::infinity(), T::neg_infinity());
        for v in &self.vertices {
            x_min = x_min.min(v[0]);
            x_max = x_max.max(v[0]);
            y_min = y_min.min(v[1]);
            y_max = y_max.max(v[1]);
        }
        let w = width as usize;
        let mut px = vec![false; height as usize * w];
        for r in 0..height {
            let y = T::from_u32(r).unwrap() + half;
            if y < y_min || y > y_max {
                continue;
            }
            for c in 0..width {
                let x = T::from_u32(c).unwrap() + half;
                if x >= x_min && x <= x_max {
                    px[r as usize * w + c as usize] = self.contains(x, y);
                }
            }
        }
        RasterMask::from_bitmap(height, width, &px).expect("bitmap sized to dimensions")
    }
}

fn on_segment<T: Real>(a: [T; 2], b: [T; 2], x: T, y: T) -> bool {
    let cross = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
    cross == T::zero()
        && x >= a[0].min(b[0])
        && x <= a[0].max(b[0])
        && y >= a[1].min(b[1])
        && y <= a[1].max(b[1])
}

/// Rasterizes a polygon onto a `height x width` grid.
pub fn rasterize<T: Real>(polygon: &Polygon<T>, height: u32, width: u32) -> RasterMask {
    polygon.rasterize(height, width)
}

impl<T: Real + Serialize> Serialize for Polygon<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.vertices.serialize(serializer)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for Polygon<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<[T; 2]>::deserialize(deserializer)?;
        Polygon::new(raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mask_iou;

    fn poly(v: &[[f64; 2]]) -> Polygon<f64> {
        Polygon::new(v.to_vec()).unwrap()
    }

    #[test]
    fn full_rectangle_covers_image() {
        let m = poly(&[[0.0, 0.0], [5.0, 0.0], [5.0, 3.0], [0.0, 3.0]]).rasterize(3, 5);
        assert_eq!(m.area(), 15);
    }

    #[test]
    fn collinear_polygon_is_empty() {
        let m = poly(&[[0.0, 0.0], [2.0, 2.0], [4.0, 4.0]]).rasterize(4, 4);
        assert!(m.is_empty());
    }

    #[test]
    fn right_triangle_pixel_centres() {
        let tri = poly(&[[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]]);
        // Independent check: centre (c+.5, r+.5) is in the closed triangle
        // iff x + y <= 4.
        let mut closed = 0;
        let mut open = 0;
        for r in 0..4 {
            for c in 0..4 {
                let s = c as f64 + 0.5 + r as f64 + 0.5;
                closed += (s <= 4.0) as u64;
                open += (s < 4.0) as u64;
            }
        }
        assert_eq!((closed, open), (10, 6));
        // Four centres sit exactly on the hypotenuse and count as inside.
        assert_eq!(tri.rasterize(4, 4).area(), closed);
    }

    #[test]
    fn self_iou_is_one() {
        let p = poly(&[[1.2, 0.7], [9.3, 2.0], [7.5, 8.8], [2.0, 6.1]]);
        let m = p.rasterize(10, 10);
        assert!(!m.is_empty());
        assert_eq!(mask_iou::<f64>(&m, &m).unwrap(), 1.0);
    }

    #[test]
    fn even_odd_hole() {
        // bow-tie: even-odd counts each lobe once
        let p = poly(&[[0.0, 0.0], [4.0, 4.0], [4.0, 0.0], [0.0, 4.0]]);
        assert!(p.contains(3.5, 2.0));
        assert!(!p.contains(2.0, 0.5));
    }

    #[test]
    fn validation() {
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 1.0]]).is_err());
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, f64::NAN], [2.0, 0.0]]).is_err());
        let p: Polygon = serde_json::from_str("[[0,0],[2,0],[0,2]]").unwrap();
        assert_eq!(p.vertices().len(), 3);
    }

    proptest::proptest! {
        #[test]
        fn rasterize_matches_full_scan(v in proptest::collection::vec((-3i32..40, -3i32..30), 3..9)) {
            // vertices on a 0.75 px grid, so some centres land on edges
            let p = poly(&v.iter().map(|&(x, y)| [x as f64 / 4.0 * 3.0, y as f64 / 4.0 * 3.0]).collect::<Vec<_>>());
            let (h, w) = (24u32, 32u32);
            let full: Vec<bool> = (0..h)
                .flat_map(|r| (0..w).map(move |c| (r, c)))
                .map(|(r, c)| p.signed_area() != 0.0 && p.contains(c as f64 + 0.5, r as f64 + 0.5))
                .collect();
            proptest::prop_assert_eq!(p.rasterize(h, w), RasterMask::from_bitmap(h, w, &full).unwrap());
        }
    }
}
