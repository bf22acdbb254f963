use super::mesh::Mesh;
use super::Point;
use crate::error::{Error, Result};

/// Bucket grid over triangle bounding boxes for point location.
pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

fn barycentric(mesh: &Mesh, t: usize, p: Point) -> [f64; 3] {
    let [a, b, c] = mesh.triangles[t].map(|i| mesh.nodes[i]);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &mesh.nodes {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let area = ((hi[0] - lo[0]) * (hi[1] - lo[1])).max(f64::MIN_POSITIVE);
        let cell = (area / mesh.n_triangles().max(1) as f64).sqrt() * 2.0;
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        for t in 0..mesh.n_triangles() {
            let pts = mesh.triangles[t].map(|i| mesh.nodes[i]);
            let bx = |v: f64, o: f64, n: usize| (((v - o) / cell).floor().max(0.0) as usize).min(n - 1);
            let x0 = bx(pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min), lo[0], nx);
            let x1 = bx(pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max), lo[0], nx);
            let y0 = bx(pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min), lo[1], ny);
            let y1 = bx(pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max), lo[1], ny);
            for j in y0..=y1 {
                for i in x0..=x1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        PointLocator { mesh, origin: lo, cell, nx, ny, buckets }
    }

    fn bucket(&self, p: Point) -> Option<usize> {
        let i = ((p[0] - self.origin[0]) / self.cell).floor();
        let j = ((p[1] - self.origin[1]) / self.cell).floor();
        let tol = 1e-9;
        let clamp = |v: f64, n: usize, raw: f64| -> Option<usize> {
            if v < -tol || v >= n as f64 + tol {
                None
            } else {
                Some((raw.max(0.0) as usize).min(n - 1))
            }
        };
        let fi = (p[0] - self.origin[0]) / self.cell;
        let fj = (p[1] - self.origin[1]) / self.cell;
        Some(clamp(fj, self.ny, j)? * self.nx + clamp(fi, self.nx, i)?)
    }

    /// Triangle containing `p` and its barycentric coordinates.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let b = self.bucket(p)?;
        let tol = 1e-10;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[b] {
            let l = barycentric(self.mesh, t, p);
            let worst = l.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= -tol && best.map_or(true, |(_, _, w)| worst > w) {
                best = Some((t, l, worst));
            }
        }
        best.map(|(t, l, _)| (t, l))
    }

    /// P1 interpolation of a nodal field at `p`.
    pub fn interpolate(&self, field: &[f64], p: Point) -> Result<f64> {
        let (t, l) = self.locate(p).ok_or(Error::PointOutsideDomain { x: p[0], y: p[1] })?;
        let tri = self.mesh.triangles[t];
        Ok(l[0] * field[tri[0]] + l[1] * field[tri[1]] + l[2] * field[tri[2]])
    }

    /// Like [`interpolate`](Self::interpolate) but extrapolates linearly from the nearest
    /// triangle when `p` lies just outside the mesh (e.g. across a polygonal boundary).
    pub fn interpolate_or_extrapolate(&self, field: &[f64], p: Point) -> f64 {
        if let Ok(v) = self.interpolate(field, p) {
            return v;
        }
        let t = (0..self.mesh.n_triangles())
            .min_by(|&a, &b| {
                let da = barycentric(self.mesh, a, p).iter().copied().fold(f64::INFINITY, f64::min);
                let db = barycentric(self.mesh, b, p).iter().copied().fold(f64::INFINITY, f64::min);
                db.total_cmp(&da)
            })
            .expect("mesh has triangles");
        let l = barycentric(self.mesh, t, p);
        let tri = self.mesh.triangles[t];
        l[0] * field[tri[0]] + l[1] * field[tri[1]] + l[2] * field[tri[2]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_macro_mesh, RectDomain};

    #[test]
    fn linear_fields_are_reproduced() {
        let m = build_macro_mesh(&RectDomain::unit_square(), 0.1).unwrap();
        let f: Vec<f64> = m.nodes.iter().map(|p| 2.0 * p[0] - 3.0 * p[1] + 0.5).collect();
        let loc = PointLocator::new(&m);
        for p in [[0.123, 0.456], [0.0, 0.0], [1.0, 1.0], [0.999, 0.5]] {
            let v = loc.interpolate(&f, p).unwrap();
            assert!((v - (2.0 * p[0] - 3.0 * p[1] + 0.5)).abs() < 1e-12);
        }
        assert!(matches!(loc.interpolate(&f, [1.5, 0.5]), Err(Error::PointOutsideDomain { .. })));
    }
}
