use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{EpsilonMesh, Mesh, PointLocator};

/// P1 interpolation weights of a macroscopic mesh at the nodes of another mesh.
#[derive(Debug, Clone)]
pub struct Restriction {
    weights: Vec<([usize; 3], [f64; 3])>,
    n_source: usize,
}

impl Restriction {
    pub fn new(source: &Mesh, target: &Mesh) -> Result<Self> {
        let loc = PointLocator::new(source);
        let weights = target
            .nodes
            .par_iter()
            .map(|&p| {
                let (t, l) = loc.locate(p).ok_or(Error::PointOutsideDomain { x: p[0], y: p[1] })?;
                Ok((source.triangles[t], l))
            })
            .collect::<Result<_>>()?;
        Ok(Restriction { weights, n_source: source.n_nodes() })
    }

    pub fn apply(&self, field: &[f64]) -> Vec<f64> {
        assert_eq!(field.len(), self.n_source);
        self.weights.iter().map(|(tri, l)| l[0] * field[tri[0]] + l[1] * field[tri[1]] + l[2] * field[tri[2]]).collect()
    }
}

/// Interpolates a nodal field of `source` at the nodes of `target`.
pub fn restrict_macro_to_micro(source: &Mesh, field: &[f64], target: &Mesh) -> Result<Vec<f64>> {
    Ok(Restriction::new(source, target)?.apply(field))
}

/// Area-weighted average of a nodal field over the perforated part of each ε-cell, in
/// `emesh.cells` order.
pub fn cell_average_unfold(emesh: &EpsilonMesh, u: &[f64]) -> Vec<f64> {
    let mesh = &emesh.mesh;
    let mut num = vec![0.0; emesh.cells.len()];
    let mut den = vec![0.0; emesh.cells.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let c = mesh.element_markers[t];
        let a = mesh.area(t);
        num[c] += a * (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
        den[c] += a;
    }
    num.iter().zip(&den).map(|(n, d)| if *d > 0.0 { n / d } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_mass;
    use crate::geometry::{build_epsilon_mesh, build_macro_mesh, EpsilonDomainSpec, InclusionSpec, RectDomain, DEFAULT_NODE_CAP};
    use std::f64::consts::PI;

    fn emesh(eps: f64) -> EpsilonMesh {
        let spec = EpsilonDomainSpec {
            domain: RectDomain::unit_square(),
            epsilon: eps,
            inclusion: InclusionSpec::disc([0.5, 0.5], 0.25),
        };
        build_epsilon_mesh(&spec, eps / 8.0, DEFAULT_NODE_CAP).unwrap()
    }

    #[test]
    fn constants_and_linears_are_exact() {
        let coarse = build_macro_mesh(&RectDomain::unit_square(), 1.0 / 16.0).unwrap();
        let m = emesh(0.125);
        let r = Restriction::new(&coarse, &m.mesh).unwrap();
        assert!(r.apply(&vec![2.5; coarse.n_nodes()]).iter().all(|v| (v - 2.5).abs() < 1e-14));
        let lin: Vec<f64> = coarse.nodes.iter().map(|p| 1.0 + 2.0 * p[0] - 3.0 * p[1]).collect();
        for (v, p) in r.apply(&lin).iter().zip(&m.mesh.nodes) {
            assert!((v - (1.0 + 2.0 * p[0] - 3.0 * p[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_field_error_is_second_order() {
        let m = emesh(0.125);
        let f = |p: &[f64; 2]| (PI * p[0]).sin() * (PI * p[1]).sin();
        let errs: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
            .iter()
            .map(|&h| {
                let coarse = build_macro_mesh(&RectDomain::unit_square(), h).unwrap();
                let vals: Vec<f64> = coarse.nodes.iter().map(f).collect();
                let got = restrict_macro_to_micro(&coarse, &vals, &m.mesh).unwrap();
                let e = got.iter().zip(&m.mesh.nodes).map(|(v, p)| (v - f(p)).abs()).fold(0.0, f64::max);
                assert!(e <= PI * PI * h * h);
                e
            })
            .collect();
        assert!((errs[1] / errs[2]).log2() > 1.7, "{errs:?}");
    }

    #[test]
    fn points_outside_are_rejected() {
        let small = build_macro_mesh(&RectDomain { rects: vec![[0.0, 0.0, 0.5, 1.0]] }, 0.1).unwrap();
        let m = emesh(0.25);
        let vals = vec![0.0; small.n_nodes()];
        assert!(matches!(restrict_macro_to_micro(&small, &vals, &m.mesh), Err(Error::PointOutsideDomain { .. })));
    }

    #[test]
    fn cell_averages() {
        let m = emesh(0.25);
        assert!(cell_average_unfold(&m, &vec![0.0; m.mesh.n_nodes()]).iter().all(|&v| v == 0.0));
        assert!(cell_average_unfold(&m, &vec![1.5; m.mesh.n_nodes()]).iter().all(|&v| (v - 1.5).abs() < 1e-14));
        let x: Vec<f64> = m.mesh.nodes.iter().map(|p| p[0]).collect();
        for (avg, k) in cell_average_unfold(&m, &x).iter().zip(&m.cells) {
            assert!((avg - (k[0] as f64 + 0.5) * 0.25).abs() < 0.25 * 1e-2);
        }
        let mass = assemble_mass(&m.mesh);
        let total: f64 = mass.mul_vec(&x).iter().sum();
        let by_cells: f64 = cell_average_unfold(&m, &x).iter().map(|v| v * m.cell_area()).sum();
        assert!((total - by_cells).abs() < 1e-12);
    }
}
