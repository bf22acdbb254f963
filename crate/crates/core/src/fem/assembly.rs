use rayon::prelude::*;

use super::coefficient::{CoefficientField, Mat2};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::geometry::{EdgeMarker, Mesh, Point};

/// Gradients of the three barycentric basis functions of triangle `t` and its area.
pub fn element_gradients(mesh: &Mesh, t: usize) -> ([[f64; 2]; 3], f64) {
    let [a, b, c] = mesh.triangles[t].map(|i| mesh.nodes[i]);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let g = [
        [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
        [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
        [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
    ];
    (g, 0.5 * det.abs())
}

fn element_stiffness(mesh: &Mesh, t: usize, d: &Mat2) -> [[f64; 3]; 3] {
    let (g, area) = element_gradients(mesh, t);
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        let dg = [d[0][0] * g[a][0] + d[0][1] * g[a][1], d[1][0] * g[a][0] + d[1][1] * g[a][1]];
        for b in 0..3 {
            k[b][a] = area * (g[b][0] * dg[0] + g[b][1] * dg[1]);
        }
    }
    k
}

fn scatter(mesh: &Mesh, local: Vec<[[f64; 3]; 3]>) -> CsrMatrix {
    let n = mesh.n_nodes();
    let mut trips = Vec::with_capacity(9 * local.len());
    for (t, k) in local.into_iter().enumerate() {
        let tri = mesh.triangles[t];
        for a in 0..3 {
            for b in 0..3 {
                trips.push((tri[a], tri[b], k[a][b]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, trips)
}

/// Stiffness matrix `∫ D ∇φ_b·∇φ_a` with `D` evaluated at element centroids.
pub fn assemble_stiffness(mesh: &Mesh, d: &CoefficientField) -> CsrMatrix {
    let coeff: Vec<Mat2> = (0..mesh.n_triangles()).into_par_iter().map(|t| d.eval(mesh.centroid(t))).collect();
    assemble_stiffness_with(mesh, &coeff)
}

/// Stiffness matrix with one coefficient matrix per element.
pub fn assemble_stiffness_with(mesh: &Mesh, coeff: &[Mat2]) -> CsrMatrix {
    assert_eq!(coeff.len(), mesh.n_triangles());
    let local: Vec<[[f64; 3]; 3]> =
        (0..mesh.n_triangles()).into_par_iter().map(|t| element_stiffness(mesh, t, &coeff[t])).collect();
    scatter(mesh, local)
}

/// Consistent P1 mass matrix.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    let local: Vec<[[f64; 3]; 3]> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let a = mesh.area(t) / 12.0;
            let mut m = [[a; 3]; 3];
            for (i, row) in m.iter_mut().enumerate() {
                row[i] = 2.0 * a;
            }
            m
        })
        .collect();
    scatter(mesh, local)
}

/// Row sums of the mass matrix, `∫ φ_a`.
pub fn assemble_lumped_mass(mesh: &Mesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.n_nodes()];
    for t in 0..mesh.n_triangles() {
        let a = mesh.area(t) / 3.0;
        for &i in &mesh.triangles[t] {
            m[i] += a;
        }
    }
    m
}

/// Boundary mass `∫_Γ w φ_a φ_b dσ` over edges carrying `marker`, with `w` evaluated at
/// edge midpoints.
pub fn assemble_boundary_mass(mesh: &Mesh, marker: EdgeMarker, weight: &dyn Fn(Point) -> f64) -> Result<CsrMatrix> {
    let w: Vec<f64> = mesh
        .edges_with(marker)
        .map(|e| {
            let [a, b] = e.nodes.map(|i| mesh.nodes[i]);
            weight([(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0])
        })
        .collect();
    assemble_boundary_mass_with(mesh, marker, &w)
}

/// Boundary mass with one weight per marked edge, in `mesh.edges_with(marker)` order.
pub fn assemble_boundary_mass_with(mesh: &Mesh, marker: EdgeMarker, weights: &[f64]) -> Result<CsrMatrix> {
    if !mesh.has_marker(marker) {
        return Err(Error::NoMarkedBoundary(marker.label().into()));
    }
    let n = mesh.n_nodes();
    let mut trips = Vec::new();
    for (e, &w) in mesh.edges_with(marker).zip(weights) {
        let c = w * mesh.edge_length(e) / 6.0;
        let [a, b] = e.nodes;
        trips.extend([(a, a, 2.0 * c), (b, b, 2.0 * c), (a, b, c), (b, a, c)]);
    }
    Ok(CsrMatrix::from_triplets(n, n, trips))
}

/// Load vector `∫ D e_dir · ∇φ_a` with one coefficient per element.
pub fn assemble_gradient_load(mesh: &Mesh, coeff: &[Mat2], dir: usize) -> Vec<f64> {
    let mut f = vec![0.0; mesh.n_nodes()];
    for t in 0..mesh.n_triangles() {
        let (g, area) = element_gradients(mesh, t);
        let de = [coeff[t][0][dir], coeff[t][1][dir]];
        for (a, &node) in mesh.triangles[t].iter().enumerate() {
            f[node] += area * (g[a][0] * de[0] + g[a][1] * de[1]);
        }
    }
    f
}

/// `‖u‖_{L²}` of a nodal field with respect to the consistent mass matrix `mass`.
pub fn l2_norm(mass: &CsrMatrix, u: &[f64]) -> f64 {
    mass.quad_form(u).max(0.0).sqrt()
}

/// `|u|_{H¹}` of a nodal field on `mesh`.
pub fn h1_seminorm(mesh: &Mesh, u: &[f64]) -> f64 {
    let mut s = 0.0;
    for t in 0..mesh.n_triangles() {
        let (g, area) = element_gradients(mesh, t);
        let tri = mesh.triangles[t];
        let mut grad = [0.0; 2];
        for a in 0..3 {
            grad[0] += u[tri[a]] * g[a][0];
            grad[1] += u[tri[a]] * g[a][1];
        }
        s += area * (grad[0] * grad[0] + grad[1] * grad[1]);
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_macro_mesh, build_unit_cell_mesh, InclusionSpec, MarkedEdge, RectDomain};

    fn unit_square_two_triangles() -> Mesh {
        Mesh {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            edges: vec![],
            element_markers: vec![0, 0],
        }
    }

    #[test]
    fn two_triangle_laplacian_pattern() {
        let m = unit_square_two_triangles();
        let k = assemble_stiffness(&m, &CoefficientField::identity());
        let expected = [
            [1.0, -0.5, 0.0, -0.5],
            [-0.5, 1.0, -0.5, 0.0],
            [0.0, -0.5, 1.0, -0.5],
            [-0.5, 0.0, -0.5, 1.0],
        ];
        let d = k.to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert!((d[i][j] - expected[i][j]).abs() < 1e-15, "({i},{j})");
            }
        }
        assert!(k.row_sums().iter().all(|s| s.abs() < 1e-15));
        let k2 = assemble_stiffness(&m, &CoefficientField::scalar(2.0));
        assert_eq!(k2, k.scaled(2.0));
    }

    #[test]
    fn anisotropic_energy_ratio() {
        let m = build_macro_mesh(&RectDomain::unit_square(), 0.125).unwrap();
        let k = assemble_stiffness(&m, &CoefficientField::constant([[2.0, 0.0], [0.0, 1.0]]).unwrap());
        let ux: Vec<f64> = m.nodes.iter().map(|p| p[0]).collect();
        let uy: Vec<f64> = m.nodes.iter().map(|p| p[1]).collect();
        assert!((k.quad_form(&ux) / k.quad_form(&uy) - 2.0).abs() < 1e-12);
        assert!((k.quad_form(&ux) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reference_triangle_mass() {
        let m = Mesh {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            edges: vec![],
            element_markers: vec![0],
        };
        let mm = assemble_mass(&m).to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 2.0 } else { 1.0 } * 0.5 / 12.0;
                assert!((mm[i][j] - e).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn mass_total_is_area_under_refinement() {
        let spec = InclusionSpec::disc([0.5, 0.5], 0.25);
        for h in [0.1, 0.05] {
            let m = build_unit_cell_mesh(&spec, h).unwrap();
            let mm = assemble_mass(&m);
            let ones = vec![1.0; m.n_nodes()];
            assert!((mm.quad_form(&ones) - m.total_area()).abs() < 1e-12);
        }
        let m = build_macro_mesh(&RectDomain::unit_square(), 0.1).unwrap();
        let ones = vec![1.0; m.n_nodes()];
        let a = assemble_mass(&m).quad_form(&ones);
        let m2 = build_macro_mesh(&RectDomain::unit_square(), 0.05).unwrap();
        let ones2 = vec![1.0; m2.n_nodes()];
        assert!((assemble_mass(&m2).quad_form(&ones2) - a).abs() < 1e-12);
    }

    #[test]
    fn boundary_mass_measures_gamma() {
        let m = build_unit_cell_mesh(&InclusionSpec::disc([0.5, 0.5], 0.25), 0.05).unwrap();
        let b = assemble_boundary_mass(&m, EdgeMarker::Gamma, &|_| 1.0).unwrap();
        let ones = vec![1.0; m.n_nodes()];
        let perimeter = m.marker_length(EdgeMarker::Gamma);
        assert!((b.quad_form(&ones) - perimeter).abs() < 1e-12);
        assert!(perimeter < std::f64::consts::FRAC_PI_2 && perimeter > 0.99 * std::f64::consts::FRAC_PI_2);
        let z = assemble_boundary_mass(&m, EdgeMarker::Gamma, &|_| 0.0).unwrap();
        assert!(z.max_abs() == 0.0);
        let mac = build_macro_mesh(&RectDomain::unit_square(), 0.1).unwrap();
        assert!(matches!(
            assemble_boundary_mass(&mac, EdgeMarker::Gamma, &|_| 1.0),
            Err(Error::NoMarkedBoundary(_))
        ));
    }

    #[test]
    fn boundary_mass_single_edge() {
        let mut m = unit_square_two_triangles();
        m.edges.push(MarkedEdge { nodes: [0, 1], marker: EdgeMarker::Gamma });
        let b = assemble_boundary_mass(&m, EdgeMarker::Gamma, &|p| 3.0 * p[0]).unwrap();
        // weight 1.5 at the midpoint, length 1
        assert!((b.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((b.get(0, 1) - 0.25).abs() < 1e-15);
    }
}
