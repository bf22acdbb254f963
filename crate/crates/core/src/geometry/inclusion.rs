use serde::{Deserialize, Serialize};

use super::Point;
use crate::error::{Error, Result};

/// Minimum distance between a disc inclusion and the cell boundary.
pub const INCLUSION_MARGIN: f64 = 0.05;

/// Shape of the reference inclusion `S` inside the unit cell `Y = (0,1)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InclusionSpec {
    Disc { center: Point, radius: f64 },
    /// Simple polygon; orientation is normalized to counter-clockwise on validation.
    Polygon { vertices: Vec<Point> },
}

impl InclusionSpec {
    pub fn disc(center: Point, radius: f64) -> Self {
        InclusionSpec::Disc { center, radius }
    }

    /// A radius-zero disc: the cell without any hole.
    pub fn empty() -> Self {
        InclusionSpec::Disc { center: [0.5, 0.5], radius: 0.0 }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, InclusionSpec::Disc { radius, .. } if *radius == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let inside = |p: &Point, pad: f64| {
            p[0] - pad >= INCLUSION_MARGIN
                && p[0] + pad <= 1.0 - INCLUSION_MARGIN
                && p[1] - pad >= INCLUSION_MARGIN
                && p[1] + pad <= 1.0 - INCLUSION_MARGIN
        };
        match self {
            InclusionSpec::Disc { center, radius } => {
                if !radius.is_finite() || *radius < 0.0 || !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidGeometry(format!("bad disc radius {radius}")));
                }
                if *radius == 0.0 {
                    return Ok(());
                }
                if !inside(center, *radius) {
                    return Err(Error::InvalidGeometry(format!(
                        "disc center ({}, {}) radius {} closer than {} to the cell boundary",
                        center[0], center[1], radius, INCLUSION_MARGIN
                    )));
                }
                Ok(())
            }
            InclusionSpec::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::InvalidGeometry("polygon needs at least 3 vertices".into()));
                }
                if let Some(p) = vertices.iter().find(|p| !inside(p, 0.0)) {
                    return Err(Error::InvalidGeometry(format!(
                        "polygon vertex ({}, {}) closer than {} to the cell boundary",
                        p[0], p[1], INCLUSION_MARGIN
                    )));
                }
                if polygon_area(vertices).abs() < 1e-12 {
                    return Err(Error::InvalidGeometry("polygon has zero area".into()));
                }
                if polygon_self_intersects(vertices) {
                    return Err(Error::InvalidGeometry("polygon is not simple".into()));
                }
                Ok(())
            }
        }
    }

    /// Exact measure of `S`.
    pub fn area(&self) -> f64 {
        match self {
            InclusionSpec::Disc { radius, .. } => std::f64::consts::PI * radius * radius,
            InclusionSpec::Polygon { vertices } => polygon_area(vertices).abs(),
        }
    }

    /// Exact length of `Γ = ∂S`.
    pub fn perimeter(&self) -> f64 {
        match self {
            InclusionSpec::Disc { radius, .. } => 2.0 * std::f64::consts::PI * radius,
            InclusionSpec::Polygon { vertices } => (0..vertices.len())
                .map(|i| dist(vertices[i], vertices[(i + 1) % vertices.len()]))
                .sum(),
        }
    }

    /// Signed distance to `Γ`, negative inside `S`.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match self {
            InclusionSpec::Disc { center, radius } => dist(p, *center) - radius,
            InclusionSpec::Polygon { vertices } => {
                let d = self.closest_point(p).map(|q| dist(p, q)).unwrap_or(f64::INFINITY);
                if point_in_polygon(vertices, p) {
                    -d
                } else {
                    d
                }
            }
        }
    }

    /// Closest point of `Γ`. `None` for the empty inclusion.
    pub fn closest_point(&self, p: Point) -> Option<Point> {
        match self {
            InclusionSpec::Disc { radius, .. } if *radius == 0.0 => None,
            InclusionSpec::Disc { center, radius } => {
                let d = dist(p, *center);
                if d == 0.0 {
                    return Some([center[0] + radius, center[1]]);
                }
                Some([
                    center[0] + radius * (p[0] - center[0]) / d,
                    center[1] + radius * (p[1] - center[1]) / d,
                ])
            }
            InclusionSpec::Polygon { vertices } => {
                let mut best = None;
                let mut best_d = f64::INFINITY;
                for i in 0..vertices.len() {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % vertices.len()];
                    let q = project_on_segment(p, a, b);
                    let d = dist(p, q);
                    if d < best_d {
                        best_d = d;
                        best = Some(q);
                    }
                }
                best
            }
        }
    }

    /// Corner points that a conforming mesh must contain.
    pub(crate) fn corners(&self) -> &[Point] {
        match self {
            InclusionSpec::Disc { .. } => &[],
            InclusionSpec::Polygon { vertices } => vertices,
        }
    }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn project_on_segment(p: Point, a: Point, b: Point) -> Point {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    [a[0] + t * ab[0], a[1] + t * ab[1]]
}

fn polygon_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

fn point_in_polygon(v: &[Point], p: Point) -> bool {
    let mut inside = false;
    let n = v.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0];
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn polygon_self_intersects(v: &[Point]) -> bool {
    let n = v.len();
    for i in 0..n {
        for j in i + 1..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}
