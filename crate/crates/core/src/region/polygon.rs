//! Convex rate regions in the plane, built by half-plane intersection.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// `a1 R1 + a2 R2 <= c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub a1: f64,
    pub a2: f64,
    pub c: f64,
}

impl HalfPlane {
    pub fn new(a1: f64, a2: f64, c: f64) -> Self {
        Self { a1, a2, c }
    }

    pub fn slack(&self, p: (f64, f64)) -> f64 {
        self.c - self.a1 * p.0 - self.a2 * p.1
    }

    fn scale(&self) -> f64 {
        self.a1.abs().max(self.a2.abs()).max(self.c.abs()).max(1.0)
    }

    fn intersect(&self, other: &HalfPlane) -> Option<(f64, f64)> {
        let det = self.a1 * other.a2 - self.a2 * other.a1;
        if det.abs() < 1e-14 * self.scale() * other.scale() {
            return None;
        }
        let x = (self.c * other.a2 - self.a2 * other.c) / det;
        let y = (self.a1 * other.c - self.c * other.a1) / det;
        Some((x, y))
    }
}

const DEDUP_TOL: f64 = 1e-12;

/// Convex polygon given by its vertices in counterclockwise order, starting
/// at the vertex on the R1 axis with the largest R1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPolygon {
    pub vertices: Vec<(f64, f64)>,
}

impl RegionPolygon {
    /// Intersection of `constraints` with the nonnegative quadrant.
    ///
    /// Constraints are sorted lexicographically before the vertex
    /// enumeration so duplicates resolve the same way regardless of input
    /// order.
    pub fn from_half_planes(constraints: &[HalfPlane]) -> RegionPolygon {
        let mut planes: Vec<HalfPlane> = constraints.to_vec();
        planes.push(HalfPlane::new(-1.0, 0.0, 0.0));
        planes.push(HalfPlane::new(0.0, -1.0, 0.0));
        planes.sort_by(|a, b| {
            (a.a1, a.a2, a.c)
                .partial_cmp(&(b.a1, b.a2, b.c))
                .unwrap_or(Ordering::Equal)
        });
        planes.dedup_by(|a, b| {
            (a.a1 - b.a1).abs() <= DEDUP_TOL && (a.a2 - b.a2).abs() <= DEDUP_TOL && (a.c - b.c).abs() <= DEDUP_TOL
        });

        let mut points: Vec<(f64, f64)> = Vec::new();
        for (i, p) in planes.iter().enumerate() {
            for q in &planes[i + 1..] {
                let Some(x) = p.intersect(q) else { continue };
                let feasible = planes.iter().all(|h| h.slack(x) >= -1e-11 * h.scale());
                if !feasible {
                    continue;
                }
                // Clean up rounding onto the axes.
                let x = (clean(x.0), clean(x.1));
                if !points
                    .iter()
                    .any(|v| (v.0 - x.0).abs() <= DEDUP_TOL && (v.1 - x.1).abs() <= DEDUP_TOL)
                {
                    points.push(x);
                }
            }
        }
        RegionPolygon {
            vertices: order_counterclockwise(points),
        }
    }

    /// Polygon from already-ordered or unordered hull vertices.
    pub fn from_vertices(vertices: Vec<(f64, f64)>) -> RegionPolygon {
        RegionPolygon {
            vertices: order_counterclockwise(vertices),
        }
    }

    /// Whether `p` lies inside, allowing `tol` outside each edge.
    pub fn contains(&self, p: (f64, f64), tol: f64) -> bool {
        let n = self.vertices.len();
        match n {
            0 => false,
            1 => dist(self.vertices[0], p) <= tol,
            2 => dist_to_segment(p, self.vertices[0], self.vertices[1]) <= tol,
            _ => (0..n).all(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let len = dist(a, b);
                if len == 0.0 {
                    return true;
                }
                // Signed distance, positive to the left of a -> b.
                let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                cross / len >= -tol
            }),
        }
    }

    /// Set inclusion `other ⊆ self`, tested on the vertices of `other`.
    pub fn contains_region(&self, other: &RegionPolygon, tol: f64) -> bool {
        other.vertices.iter().all(|&v| self.contains(v, tol))
    }

    /// Largest `r` with `(r, r)` in the region.
    pub fn symmetric_rate(&self) -> f64 {
        let n = self.vertices.len();
        let mut best: f64 = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            // Solve a + t (b - a) = (r, r).
            let denom = (b.0 - a.0) - (b.1 - a.1);
            if denom.abs() < 1e-300 {
                if (a.0 - a.1).abs() <= DEDUP_TOL {
                    best = best.max(a.0.min(a.1));
                }
                continue;
            }
            let t = (a.1 - a.0) / denom;
            if (-1e-12..=1.0 + 1e-12).contains(&t) {
                let r = a.0 + t * (b.0 - a.0);
                best = best.max(r);
            }
        }
        best
    }

    /// Largest R1 in the region.
    pub fn max_r1(&self) -> f64 {
        self.vertices.iter().map(|v| v.0).fold(0.0, f64::max)
    }

    pub fn max_r2(&self) -> f64 {
        self.vertices.iter().map(|v| v.1).fold(0.0, f64::max)
    }

    /// Largest weighted sum `w1 R1 + w2 R2` over the region.
    pub fn support(&self, w1: f64, w2: f64) -> f64 {
        self.vertices
            .iter()
            .map(|v| w1 * v.0 + w2 * v.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether the polygon is convex with counterclockwise orientation.
    pub fn is_convex(&self, tol: f64) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return true;
        }
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0) >= -tol
        })
    }

    /// Writes `R1,R2` vertex rows.
    pub fn to_csv(&self, digits: usize) -> String {
        let mut out = String::from("R1,R2\n");
        for v in &self.vertices {
            out.push_str(&format!("{},{}\n", fmt_sig(v.0, digits), fmt_sig(v.1, digits)));
        }
        out
    }
}

/// Formats `x` with `digits` significant digits, trimming trailing zeros.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let digits = digits.max(1);
    let mag = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn clean(x: f64) -> f64 {
    if x.abs() < 1e-13 {
        0.0
    } else {
        x
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn dist_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    dist(p, (a.0 + t * dx, a.1 + t * dy))
}

fn order_counterclockwise(mut points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if points.len() < 2 {
        return points;
    }
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.1).sum::<f64>() / n;
    points.sort_by(|a, b| {
        let ta = (a.1 - cy).atan2(a.0 - cx);
        let tb = (b.1 - cy).atan2(b.0 - cx);
        ta.partial_cmp(&tb).unwrap_or(Ordering::Equal)
    });
    // Drop points lying on the segment between their neighbours.
    let mut i = 0;
    while points.len() > 2 && i < points.len() {
        let m = points.len();
        let a = points[(i + m - 1) % m];
        let b = points[i];
        let c = points[(i + 1) % m];
        let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        if cross.abs() <= 1e-14 {
            points.remove(i);
        } else {
            i += 1;
        }
    }
    // Start at the R1-axis vertex with the largest R1.
    let start = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.1.abs() <= DEDUP_TOL)
        .max_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).unwrap_or(Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0);
    points.rotate_left(start);
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex() -> RegionPolygon {
        RegionPolygon::from_half_planes(&[HalfPlane::new(1.0, 1.0, 1.0)])
    }

    #[test]
    fn unit_simplex() {
        let p = simplex();
        assert_eq!(p.vertices, vec![(1.0, 0.0), (0.0, 1.0), (0.0, 0.0)]);
        assert!((p.symmetric_rate() - 0.5).abs() < 1e-15);
        assert!(p.is_convex(0.0));
    }

    #[test]
    fn duplicate_and_redundant_constraints() {
        let p = RegionPolygon::from_half_planes(&[
            HalfPlane::new(1.0, 1.0, 1.0),
            HalfPlane::new(1.0, 1.0, 1.0),
            HalfPlane::new(2.0, 2.0, 3.0),
            HalfPlane::new(1.0, 0.0, 0.6),
        ]);
        assert_eq!(p.vertices.len(), 4);
        assert_eq!(p.vertices[0], (0.6, 0.0));
        assert!(p.contains((0.6, 0.4), 1e-12));
        assert!(!p.contains((0.61, 0.1), 1e-9));
    }

    #[test]
    fn containment() {
        let big = simplex();
        let small = RegionPolygon::from_half_planes(&[HalfPlane::new(2.0, 2.0, 1.0)]);
        assert!(big.contains_region(&small, 0.0));
        assert!(!small.contains_region(&big, 1e-9));
    }

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.28070731940, 6), "0.280707");
        assert_eq!(fmt_sig(9.8534926, 6), "9.85349");
        assert_eq!(fmt_sig(0.5, 6), "0.5");
        assert_eq!(fmt_sig(0.0, 6), "0");
        assert_eq!(fmt_sig(144.0, 3), "144");
    }
}
