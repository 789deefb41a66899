use serde::{Deserialize, Serialize};

use super::AcousticsError;
use crate::geometry::Point3D;

/// One cycle of focal points along a closed outline, equally spaced in arc length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StmPath {
    pub points: Vec<Point3D>,
    /// Arc length between consecutive samples, m.
    pub spacing: f64,
    /// Closed-path length, m.
    pub perimeter: f64,
    pub update_rate: f64,
}

impl StmPath {
    /// Focal point for update number `n`, repeating cyclically.
    pub fn at(&self, n: usize) -> Point3D {
        self.points[n % self.points.len()]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Seconds to traverse the outline once.
    pub fn period(&self) -> f64 {
        self.perimeter / (self.spacing * self.update_rate)
    }
}

/// Samples a closed polyline at `speed / rate` spacing, starting at the first vertex.
/// A cycle holds `floor(perimeter / spacing)` samples.
pub fn stm_path(shape: &[Point3D], speed: f64, rate: f64) -> Result<StmPath, AcousticsError> {
    if !(speed > 0.0 && speed.is_finite() && rate > 0.0 && rate.is_finite()) {
        return Err(AcousticsError::InvalidRate);
    }
    if shape.iter().any(|p| !p.is_finite()) {
        return Err(AcousticsError::NonFinitePoint);
    }
    let n = shape.len();
    let segments: Vec<(Point3D, Point3D, f64)> = (0..n)
        .map(|i| {
            let (a, b) = (shape[i], shape[(i + 1) % n]);
            (a, b, a.distance(&b))
        })
        .collect();
    let perimeter: f64 = segments.iter().map(|s| s.2).sum();
    if !(perimeter > 1e-12) {
        return Err(AcousticsError::ZeroLengthPath);
    }
    let spacing = speed / rate;
    let count = ((perimeter / spacing + 1e-9).floor() as usize).max(1);

    let mut points = Vec::with_capacity(count);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for j in 0..count {
        let s = j as f64 * spacing;
        while seg + 1 < segments.len() && s >= seg_start + segments[seg].2 - 1e-12 {
            seg_start += segments[seg].2;
            seg += 1;
        }
        let (a, b, len) = segments[seg];
        let f = if len > 0.0 { ((s - seg_start) / len).clamp(0.0, 1.0) } else { 0.0 };
        points.push(Point3D::new(
            a.x + (b.x - a.x) * f,
            a.y + (b.y - a.y) * f,
            a.z + (b.z - a.z) * f,
        ));
    }
    Ok(StmPath {
        points,
        spacing,
        perimeter,
        update_rate: rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn polygon(r: f64, n: usize) -> Vec<Point3D> {
        (0..n)
            .map(|i| {
                let a = TAU * i as f64 / n as f64;
                Point3D::new(r * a.cos(), r * a.sin(), 0.15)
            })
            .collect()
    }

    #[test]
    fn repeated_vertex_rejected() {
        let p = Point3D::new(0.1, 0.1, 0.1);
        assert!(matches!(stm_path(&[p, p, p], 1.0, 1000.0), Err(AcousticsError::ZeroLengthPath)));
        assert!(matches!(stm_path(&[p], 1.0, 1000.0), Err(AcousticsError::ZeroLengthPath)));
        assert!(stm_path(&[p, Point3D::new(0.2, 0.1, 0.1)], 0.0, 1000.0).is_err());
    }

    #[test]
    fn circle_cycle_length() {
        let path = stm_path(&polygon(0.020, 360), 2.0, 1000.0).unwrap();
        assert_eq!(path.len(), 62);
        assert!((path.period() - 0.062_83).abs() < 1e-4);
        assert_eq!(path.at(0), polygon(0.020, 360)[0]);
        assert_eq!(path.at(62), path.at(0));
    }

    #[test]
    fn square_corners() {
        let s = 0.04;
        let sq = [
            Point3D::new(0.0, 0.0, 0.1),
            Point3D::new(s, 0.0, 0.1),
            Point3D::new(s, s, 0.1),
            Point3D::new(0.0, s, 0.1),
        ];
        let path = stm_path(&sq, 1.0, 500.0).unwrap();
        assert_eq!(path.len(), 80);
        // arc-length walk oracle: sample j sits at 2 mm * j along the perimeter
        for (j, corner) in [(0, sq[0]), (20, sq[1]), (40, sq[2]), (60, sq[3])] {
            assert!(path.at(j).distance(&corner) < 1e-12, "sample {j}");
        }
        let mid = path.at(30);
        assert!(mid.distance(&Point3D::new(s, 0.02, 0.1)) < 1e-12);
    }

    proptest! {
        #[test]
        fn constant_spacing_within_segments(
            pts in proptest::collection::vec((0.0..0.1f64, 0.0..0.1f64), 3..8),
            speed in 0.5..3.0f64,
        ) {
            let shape: Vec<Point3D> = pts.iter().map(|&(x, y)| Point3D::new(x, y, 0.12)).collect();
            let path = match stm_path(&shape, speed, 1000.0) {
                Ok(p) => p,
                Err(_) => return Ok(()),
            };
            // consecutive samples on one straight segment are exactly `spacing` apart
            let n = shape.len();
            let on_segment = |p: &Point3D, i: usize| {
                let (a, b) = (shape[i], shape[(i + 1) % n]);
                let ab = a.distance(&b);
                ab > 0.0 && (a.distance(p) + p.distance(&b) - ab).abs() < 1e-12
            };
            for w in path.points.windows(2) {
                if (0..n).any(|i| on_segment(&w[0], i) && on_segment(&w[1], i)) {
                    prop_assert!((w[0].distance(&w[1]) - path.spacing).abs() < 1e-12);
                }
            }
        }
    }
}
