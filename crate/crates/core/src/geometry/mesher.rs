//! Structured background triangulation with boundary snapping.
//!
//! The background grid uses a "union-jack" diagonal pattern (diagonal direction alternating
//! with the parity of `i + j`). With an even number of divisions the pattern is invariant
//! under the symmetry group of the square, so symmetric inclusions give symmetric meshes.
//! Grid edges crossed by the inclusion boundary get their endpoint closest to Γ projected
//! onto Γ; triangles with no vertex strictly outside the inclusion are removed.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::inclusion::{dist, InclusionSpec};
use super::mesh::{EdgeMarker, MarkedEdge, Mesh};
use super::Point;
use crate::error::{Error, Result};

/// Default cap on the estimated node count of an ε-domain mesh.
pub const DEFAULT_NODE_CAP: usize = 2_000_000;

/// Union of axis-aligned rectangles `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectDomain {
    pub rects: Vec<[f64; 4]>,
}

impl RectDomain {
    pub fn unit_square() -> Self {
        RectDomain { rects: vec![[0.0, 0.0, 1.0, 1.0]] }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.rects.iter().any(|r| p[0] >= r[0] && p[0] <= r[2] && p[1] >= r[1] && p[1] <= r[3])
    }

    fn contains_strict(&self, p: Point) -> bool {
        self.rects.iter().any(|r| p[0] > r[0] && p[0] < r[2] && p[1] > r[1] && p[1] < r[3])
    }

    fn validate(&self) -> Result<()> {
        if self.rects.is_empty() {
            return Err(Error::MeshFailure("domain has no rectangles".into()));
        }
        for r in &self.rects {
            if !r.iter().all(|v| v.is_finite()) || r[2] <= r[0] || r[3] <= r[1] {
                return Err(Error::MeshFailure(format!("degenerate rectangle {r:?}")));
            }
        }
        Ok(())
    }

    fn breakpoints(&self, axis: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.rects.iter().flat_map(|r| [r[axis], r[axis + 2]]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        v
    }

    /// Exact area of the union.
    pub fn area(&self) -> f64 {
        let xs = self.breakpoints(0);
        let ys = self.breakpoints(1);
        let mut a = 0.0;
        for i in 0..xs.len().saturating_sub(1) {
            for j in 0..ys.len().saturating_sub(1) {
                let c = [(xs[i] + xs[i + 1]) / 2.0, (ys[j] + ys[j + 1]) / 2.0];
                if self.contains_strict(c) {
                    a += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
                }
            }
        }
        a
    }
}

/// Perforated domain Ωε*: a rectangle union with ε-scaled inclusions in every full cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonDomainSpec {
    pub domain: RectDomain,
    pub epsilon: f64,
    pub inclusion: InclusionSpec,
}

impl EpsilonDomainSpec {
    /// Number of cells per unit length, `m = 1/ε`.
    pub fn cells_per_unit(&self) -> Result<i64> {
        let eps = self.epsilon;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidGeometry(format!("epsilon {eps} outside (0, 1)")));
        }
        let m = (1.0 / eps).round();
        if (m * eps - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidGeometry(format!("epsilon {eps} is not 1/m for an integer m")));
        }
        Ok(m as i64)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate().map_err(|e| match e {
            Error::MeshFailure(s) => Error::InvalidGeometry(s),
            other => other,
        })?;
        let m = self.cells_per_unit()? as f64;
        for r in &self.domain.rects {
            for &c in r {
                let scaled = c * m;
                if (scaled - scaled.round()).abs() > 1e-9 * scaled.abs().max(1.0) {
                    return Err(Error::InvalidGeometry(format!(
                        "corner coordinate {c} is not an integer multiple of epsilon {}",
                        self.epsilon
                    )));
                }
            }
        }
        self.inclusion.validate()
    }
}

/// Mesh of Ωε* with the cell decoration needed for per-cell diagnostics.
#[derive(Debug, Clone)]
pub struct EpsilonMesh {
    pub mesh: Mesh,
    pub epsilon: f64,
    /// Integer cell coordinates `k`; `mesh.element_markers[t]` indexes this list.
    pub cells: Vec<[i64; 2]>,
    /// The reference cell mesh that was tiled (unit-cell coordinates).
    pub reference_cell: Mesh,
    /// Reference cell edge length used for the tiling.
    pub h_ref: f64,
}

impl EpsilonMesh {
    /// Discrete measure of the perforated part of one ε-cell.
    pub fn cell_area(&self) -> f64 {
        self.reference_cell.total_area() * self.epsilon * self.epsilon
    }
}

pub(crate) struct CellGrid {
    pub mesh: Mesh,
    pub divisions: usize,
    /// Grid index `(i, j)` of nodes on the cell faces.
    pub face_index: Vec<Option<[usize; 2]>>,
}

fn union_jack(i: usize, j: usize, idx: impl Fn(usize, usize) -> usize) -> [[usize; 3]; 2] {
    let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
    if (i + j) % 2 == 0 {
        [[a, b, c], [a, c, d]]
    } else {
        [[a, b, d], [b, c, d]]
    }
}

pub(crate) fn build_cell_grid(spec: &InclusionSpec, h: f64) -> Result<CellGrid> {
    if !(h > 0.0 && h <= 0.25) {
        return Err(Error::InvalidGeometry(format!("target edge length {h} outside (0, 0.25]")));
    }
    spec.validate()?;
    let mut n = (std::f64::consts::SQRT_2 / h - 1e-9).ceil() as usize;
    n = n.max(4);
    if n % 2 == 1 {
        n += 1;
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let nf = n as f64;
    let mut nodes: Vec<Point> = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([i as f64 / nf, j as f64 / nf]);
        }
    }
    let on_face = |k: usize| {
        let (i, j) = (k % (n + 1), k / (n + 1));
        i == 0 || i == n || j == 0 || j == n
    };
    let mut tris = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            tris.extend(union_jack(i, j, idx));
        }
    }

    let empty = spec.is_empty();
    let mut phi: Vec<f64> = if empty {
        vec![1.0; nodes.len()]
    } else {
        nodes.iter().map(|&p| spec.signed_distance(p)).collect()
    };

    if !empty {
        for &c in spec.corners() {
            let k = (0..nodes.len())
                .min_by(|&a, &b| dist(nodes[a], c).total_cmp(&dist(nodes[b], c)))
                .expect("grid is non-empty");
            if on_face(k) {
                return Err(Error::MeshFailure(format!("h = {h} too coarse: inclusion corner snaps to a cell face")));
            }
            nodes[k] = c;
            phi[k] = 0.0;
        }
        let mut grid_edges: Vec<[usize; 2]> = tris
            .iter()
            .flat_map(|t| (0..3).map(move |k| [t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3])]))
            .collect();
        grid_edges.sort_unstable();
        grid_edges.dedup();
        let tie = 1e-12 * h;
        let crossing: Vec<[usize; 2]> = grid_edges.into_iter().filter(|&[a, b]| phi[a] * phi[b] < 0.0).collect();
        // nodes barred from snapping because they would land on the same point as a neighbor
        let mut barred = vec![false; nodes.len()];
        let mut targets: Vec<Option<Point>> = vec![None; nodes.len()];
        for _ in 0..16 {
            let mut snap = vec![false; nodes.len()];
            for &[a, b] in &crossing {
                let (da, db) = (phi[a].abs(), phi[b].abs());
                let preferred = if (da - db).abs() <= tie {
                    if phi[a] > 0.0 {
                        a
                    } else {
                        b
                    }
                } else if da < db {
                    a
                } else {
                    b
                };
                let other = if preferred == a { b } else { a };
                let pick = match (barred[preferred], barred[other]) {
                    (false, _) => preferred,
                    (true, false) => other,
                    (true, true) => {
                        return Err(Error::MeshFailure(format!("h = {h}: cannot resolve inclusion boundary snapping")))
                    }
                };
                snap[pick] = true;
            }
            targets = (0..nodes.len())
                .map(|k| snap[k].then(|| spec.closest_point(nodes[k]).expect("non-empty inclusion")))
                .collect();
            let mut changed = false;
            for &[a, b] in &crossing {
                if let (Some(pa), Some(pb)) = (targets[a], targets[b]) {
                    if dist(pa, pb) < 1e-6 * h {
                        let worse = if phi[a].abs() > phi[b].abs() { a } else { b };
                        barred[worse] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for k in 0..nodes.len() {
            if let Some(t) = targets[k] {
                if on_face(k) {
                    return Err(Error::MeshFailure(format!(
                        "h = {h} too coarse: inclusion boundary snaps a cell face node"
                    )));
                }
                nodes[k] = t;
                phi[k] = 0.0;
            }
        }
    }

    let kept: Vec<[usize; 3]> =
        tris.into_iter().filter(|t| t.iter().any(|&k| phi[k] > 0.0)).collect();

    let mut used = vec![false; nodes.len()];
    for t in &kept {
        for &k in t {
            used[k] = true;
        }
    }
    // grid order numbering
    let order: Vec<usize> = (0..nodes.len()).filter(|&k| used[k]).collect();
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut out_nodes = Vec::with_capacity(order.len());
    let mut face_index = Vec::with_capacity(order.len());
    for (new, &k) in order.iter().enumerate() {
        remap[k] = new;
        out_nodes.push(nodes[k]);
        face_index.push(on_face(k).then(|| [k % (n + 1), k / (n + 1)]));
    }
    let triangles: Vec<[usize; 3]> = kept.iter().map(|t| t.map(|k| remap[k])).collect();
    let phi_new: Vec<f64> = order.iter().map(|&k| phi[k]).collect();

    let mut mesh = Mesh {
        element_markers: vec![0; triangles.len()],
        nodes: out_nodes,
        triangles,
        edges: Vec::new(),
    };
    mesh.validate()?;
    let min_area = 1e-10 / (nf * nf);
    if let Some(t) = (0..mesh.n_triangles()).find(|&t| mesh.area(t) < min_area) {
        return Err(Error::MeshFailure(format!("snapping produced a degenerate triangle {t}")));
    }

    for [a, b] in mesh.boundary_edges() {
        let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
        let (fa, fb) = (face_index[a], face_index[b]);
        let marker = match (fa, fb) {
            (Some([ia, _]), Some([ib, _])) if ia == ib && (ia == 0 || ia == n) => EdgeMarker::PeriodicX,
            (Some([_, ja]), Some([_, jb])) if ja == jb && (ja == 0 || ja == n) => EdgeMarker::PeriodicY,
            _ => {
                if phi_new[a] != 0.0 || phi_new[b] != 0.0 {
                    return Err(Error::MeshFailure(format!(
                        "hole boundary edge ({}, {})-({}, {}) does not lie on the inclusion boundary",
                        pa[0], pa[1], pb[0], pb[1]
                    )));
                }
                EdgeMarker::Gamma
            }
        };
        mesh.edges.push(MarkedEdge { nodes: [a, b], marker });
    }
    if !empty && !mesh.has_marker(EdgeMarker::Gamma) {
        return Err(Error::MeshFailure(format!("h = {h} does not resolve the inclusion")));
    }
    Ok(CellGrid { mesh, divisions: n, face_index })
}

/// Mesh of the perforated unit cell `Y* = Y \ S`.
///
/// Boundary edges are marked `Gamma` on the inclusion and `PeriodicX`/`PeriodicY` on the
/// cell faces. Face node traces match exactly on opposite faces.
pub fn build_unit_cell_mesh(spec: &InclusionSpec, h: f64) -> Result<Mesh> {
    build_cell_grid(spec, h).map(|g| g.mesh)
}

/// Structured mesh of a rectangle union with all boundary edges marked `Outer`.
pub fn build_macro_mesh(domain: &RectDomain, h: f64) -> Result<Mesh> {
    domain.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::MeshFailure(format!("edge length {h} must be positive")));
    }
    let subdivide = |bp: Vec<f64>| {
        let mut out = vec![bp[0]];
        for w in bp.windows(2) {
            let k = ((w[1] - w[0]) / h - 1e-9).ceil().max(1.0) as usize;
            for s in 1..=k {
                out.push(if s == k { w[1] } else { w[0] + (w[1] - w[0]) * s as f64 / k as f64 });
            }
        }
        out
    };
    let xs = subdivide(domain.breakpoints(0));
    let ys = subdivide(domain.breakpoints(1));
    let (nx, ny) = (xs.len(), ys.len());
    if (nx - 1) * (ny - 1) > 50_000_000 {
        return Err(Error::ResourceLimit { estimated: nx * ny, cap: 50_000_000 });
    }
    let mut used = vec![usize::MAX; nx * ny];
    let mut cells = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [(xs[i] + xs[i + 1]) / 2.0, (ys[j] + ys[j + 1]) / 2.0];
            if domain.contains_strict(c) {
                cells.push((i, j));
                for (a, b) in [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)] {
                    used[b * nx + a] = 0;
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::MeshFailure("domain has zero area".into()));
    }
    let mut nodes = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if used[j * nx + i] != usize::MAX {
                used[j * nx + i] = nodes.len();
                nodes.push([xs[i], ys[j]]);
            }
        }
    }
    let mut triangles = Vec::with_capacity(2 * cells.len());
    for (i, j) in cells {
        triangles.extend(union_jack(i, j, |a, b| used[b * nx + a]));
    }
    let mut mesh = Mesh { element_markers: vec![0; triangles.len()], nodes, triangles, edges: Vec::new() };
    mesh.validate()?;
    mesh.edges = mesh
        .boundary_edges()
        .into_iter()
        .map(|nodes| MarkedEdge { nodes, marker: EdgeMarker::Outer })
        .collect();
    Ok(mesh)
}

/// Mesh of Ωε* obtained by tiling the reference cell mesh over every cell `ε(k + Y)` of Ω.
///
/// `h_cell` is the physical target edge length and must resolve the scaled inclusion
/// (`h_cell ≤ ε/8`).
pub fn build_epsilon_mesh(spec: &EpsilonDomainSpec, h_cell: f64, node_cap: usize) -> Result<EpsilonMesh> {
    spec.validate()?;
    let eps = spec.epsilon;
    if !(h_cell > 0.0 && h_cell <= eps / 8.0 * (1.0 + 1e-12)) {
        return Err(Error::InvalidGeometry(format!(
            "h_cell = {h_cell} does not resolve cells of size epsilon = {eps} (need h_cell <= epsilon/8)"
        )));
    }
    let h_ref = h_cell / eps;
    let grid = build_cell_grid(&spec.inclusion, h_ref)?;
    let m = spec.cells_per_unit()?;
    let mf = m as f64;

    let xs: Vec<i64> = spec.domain.breakpoints(0).iter().map(|v| (v * mf).round() as i64).collect();
    let ys: Vec<i64> = spec.domain.breakpoints(1).iter().map(|v| (v * mf).round() as i64).collect();
    let (kx0, kx1) = (xs[0], *xs.last().unwrap());
    let (ky0, ky1) = (ys[0], *ys.last().unwrap());
    let mut cells = Vec::new();
    for ky in ky0..ky1 {
        for kx in kx0..kx1 {
            let c = [(kx as f64 + 0.5) / mf, (ky as f64 + 0.5) / mf];
            if spec.domain.contains_strict(c) {
                cells.push([kx, ky]);
            }
        }
    }
    let estimated = grid.mesh.n_nodes() * cells.len();
    if estimated > node_cap {
        return Err(Error::ResourceLimit { estimated, cap: node_cap });
    }

    let cell = &grid.mesh;
    let n = grid.divisions as i64;
    let mut face_nodes: HashMap<[i64; 2], usize> = HashMap::new();
    let mut nodes: Vec<Point> = Vec::with_capacity(estimated);
    let mut triangles = Vec::with_capacity(cell.n_triangles() * cells.len());
    let mut element_markers = Vec::with_capacity(triangles.capacity());
    let mut gamma = Vec::new();
    let mut local = vec![0usize; cell.n_nodes()];
    for (c, &[kx, ky]) in cells.iter().enumerate() {
        for (k, p) in cell.nodes.iter().enumerate() {
            local[k] = match grid.face_index[k] {
                Some([i, j]) => {
                    let key = [kx * n + i as i64, ky * n + j as i64];
                    *face_nodes.entry(key).or_insert_with(|| {
                        nodes.push([key[0] as f64 * eps / n as f64, key[1] as f64 * eps / n as f64]);
                        nodes.len() - 1
                    })
                }
                None => {
                    nodes.push([eps * (kx as f64 + p[0]), eps * (ky as f64 + p[1])]);
                    nodes.len() - 1
                }
            };
        }
        for t in &cell.triangles {
            triangles.push(t.map(|k| local[k]));
            element_markers.push(c);
        }
        for e in cell.edges_with(EdgeMarker::Gamma) {
            gamma.push(MarkedEdge { nodes: e.nodes.map(|k| local[k]), marker: EdgeMarker::Gamma });
        }
    }
    let mut mesh = Mesh { nodes, triangles, edges: Vec::new(), element_markers };
    mesh.validate()?;
    let gamma_keys: std::collections::HashSet<[usize; 2]> =
        gamma.iter().map(|e| [e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1])]).collect();
    let outer: Vec<MarkedEdge> = mesh
        .boundary_edges()
        .into_iter()
        .filter(|k| !gamma_keys.contains(k))
        .map(|nodes| MarkedEdge { nodes, marker: EdgeMarker::Outer })
        .collect();
    mesh.edges = gamma;
    mesh.edges.extend(outer);
    Ok(EpsilonMesh { mesh, epsilon: eps, cells, reference_cell: grid.mesh, h_ref })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_cell_area_matches_disc_complement() {
        let h = 0.05;
        let m = build_unit_cell_mesh(&InclusionSpec::disc([0.5, 0.5], 0.25), h).unwrap();
        let exact = 1.0 - PI / 16.0;
        let rel = (m.total_area() - exact).abs() / exact;
        assert!(rel <= 2.0 * h * h, "relative area error {rel}");
        assert_eq!(m.marker_loops(EdgeMarker::Gamma), 1);
        for t in 0..m.n_triangles() {
            assert!(m.diameter(t) <= 2.0 * h);
        }
        for e in m.edges_with(EdgeMarker::Gamma) {
            assert!(m.edge_length(e) <= h, "Γ segment {} > h", m.edge_length(e));
        }
    }

    #[test]
    fn empty_inclusion_gives_full_square() {
        let m = build_unit_cell_mesh(&InclusionSpec::empty(), 0.1).unwrap();
        assert!((m.total_area() - 1.0).abs() < 1e-14);
        assert!(!m.has_marker(EdgeMarker::Gamma));
        assert!(m.has_marker(EdgeMarker::PeriodicX) && m.has_marker(EdgeMarker::PeriodicY));
    }

    #[test]
    fn touching_disc_is_invalid() {
        let r = build_unit_cell_mesh(&InclusionSpec::disc([0.5, 0.5], 0.48), 0.05);
        assert!(matches!(r, Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn square_polygon_inclusion_is_exact() {
        let sq = InclusionSpec::Polygon { vertices: vec![[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]] };
        let m = build_unit_cell_mesh(&sq, 0.1).unwrap();
        assert!((m.total_area() - 0.75).abs() < 1e-12, "{}", m.total_area());
        assert!((m.marker_length(EdgeMarker::Gamma) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn macro_unit_square() {
        let m = build_macro_mesh(&RectDomain::unit_square(), 0.1).unwrap();
        assert!(m.n_triangles() >= 200);
        assert!(m.edges.iter().all(|e| e.marker == EdgeMarker::Outer));
        assert!((m.marker_length(EdgeMarker::Outer) - 4.0).abs() < 1e-12);
        assert!(!m.has_marker(EdgeMarker::Gamma));
    }

    #[test]
    fn macro_degenerate_domain_fails() {
        let d = RectDomain { rects: vec![[0.0, 0.0, 1.0, 0.0]] };
        assert!(matches!(build_macro_mesh(&d, 0.1), Err(Error::MeshFailure(_))));
    }

    #[test]
    fn macro_l_shape_perimeter() {
        let d = RectDomain { rects: vec![[0.0, 0.0, 2.0, 1.0], [0.0, 0.0, 1.0, 2.0]] };
        let m = build_macro_mesh(&d, 0.1).unwrap();
        assert!((m.marker_length(EdgeMarker::Outer) - 8.0).abs() <= 1e-10);
        assert!((m.total_area() - 3.0).abs() < 1e-12);
        assert_eq!(m.marker_loops(EdgeMarker::Outer), 1);
        assert!((d.area() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn epsilon_mesh_counts_inclusions() {
        let spec = EpsilonDomainSpec {
            domain: RectDomain::unit_square(),
            epsilon: 0.25,
            inclusion: InclusionSpec::disc([0.5, 0.5], 0.25),
        };
        let em = build_epsilon_mesh(&spec, 0.25 / 8.0, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(em.mesh.marker_loops(EdgeMarker::Gamma), 16);
        assert_eq!(em.mesh.marker_loops(EdgeMarker::Outer), 1);
        assert_eq!(em.cells.len(), 16);
        let outer_nodes = em.mesh.marker_nodes(EdgeMarker::Outer);
        let gamma_nodes = em.mesh.marker_nodes(EdgeMarker::Gamma);
        assert!(outer_nodes.iter().all(|n| gamma_nodes.binary_search(n).is_err()));
    }

    #[test]
    fn epsilon_mesh_area() {
        let spec = EpsilonDomainSpec {
            domain: RectDomain::unit_square(),
            epsilon: 0.125,
            inclusion: InclusionSpec::disc([0.5, 0.5], 0.25),
        };
        let em = build_epsilon_mesh(&spec, 0.125 / 8.0, DEFAULT_NODE_CAP).unwrap();
        let exact = 1.0 - 64.0 * 0.125 * 0.125 * PI / 16.0;
        let h_ref = 1.0 / 8.0;
        assert!((em.mesh.total_area() - exact).abs() / exact <= 2.0 * h_ref * h_ref);
        assert!((em.mesh.total_area() - 64.0 * em.cell_area()).abs() < 1e-12);
    }

    #[test]
    fn epsilon_mesh_rejects_misaligned_domain() {
        let spec = EpsilonDomainSpec {
            domain: RectDomain { rects: vec![[0.1, 0.0, 1.1, 1.0]] },
            epsilon: 1.0 / 3.0,
            inclusion: InclusionSpec::disc([0.5, 0.5], 0.25),
        };
        assert!(matches!(build_epsilon_mesh(&spec, 1.0 / 24.0, DEFAULT_NODE_CAP), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn epsilon_mesh_node_cap() {
        let spec = EpsilonDomainSpec {
            domain: RectDomain::unit_square(),
            epsilon: 0.25,
            inclusion: InclusionSpec::disc([0.5, 0.5], 0.25),
        };
        assert!(matches!(build_epsilon_mesh(&spec, 0.25 / 8.0, 100), Err(Error::ResourceLimit { .. })));
    }

    #[test]
    fn snapping_survives_an_h_sweep() {
        let specs = [
            InclusionSpec::disc([0.5, 0.5], 0.25),
            InclusionSpec::disc([0.45, 0.55], 0.3),
            InclusionSpec::Polygon { vertices: vec![[0.3, 0.3], [0.7, 0.35], [0.5, 0.72]] },
        ];
        for spec in &specs {
            for k in 0..24 {
                let h = 0.1 * 0.85f64.powi(k);
                let m = build_unit_cell_mesh(spec, h).unwrap_or_else(|e| panic!("h = {h}: {e}"));
                assert_eq!(m.marker_loops(EdgeMarker::Gamma), 1, "h = {h}");
                assert!((m.total_area() - (1.0 - spec.area())).abs() <= 4.0 * h * h, "h = {h}");
            }
        }
    }
}
