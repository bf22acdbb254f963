//! Periodic correctors on the perforated reference cell and the effective tensors built
//! from them.

mod table;

pub use table::{tabulate_b, BTable, TableOptions};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_boundary_mass, assemble_gradient_load, assemble_lumped_mass, assemble_stiffness_with,
    element_gradients, sym_eigenvalues, CoefficientField, CsrMatrix, DofMap, Mat2, MultiplierSolver,
};
use crate::geometry::{build_unit_cell_mesh, pair_periodic_nodes, EdgeMarker, InclusionSpec, Mesh, PeriodicMap};

/// Relative residual required from every cell solve.
pub const CELL_SOLVE_TOL: f64 = 1e-10;

/// Perforated reference cell `Y*` with its periodic structure and cached integrals.
#[derive(Debug, Clone)]
pub struct CellMesh {
    pub mesh: Mesh,
    pub periodic: PeriodicMap,
    /// `∫_{Y*} φ_a` per node.
    pub weights: Vec<f64>,
    /// `|Y*|`.
    pub volume: f64,
    /// `|Γ|` (zero without an inclusion).
    pub gamma_length: f64,
    /// `∫_Γ φ_a φ_b`, absent without an inclusion.
    pub gamma_mass: Option<CsrMatrix>,
    pub h: f64,
    pub fingerprint: String,
}

impl CellMesh {
    pub fn build(spec: &InclusionSpec, h: f64) -> Result<Self> {
        Self::from_mesh(build_unit_cell_mesh(spec, h)?, h)
    }

    /// Wraps an existing periodic cell mesh (for example an imported one).
    pub fn from_mesh(mesh: Mesh, h: f64) -> Result<Self> {
        mesh.validate()?;
        let periodic = pair_periodic_nodes(&mesh, None)?;
        let weights = assemble_lumped_mass(&mesh);
        let volume = mesh.total_area();
        let gamma_mass = if mesh.has_marker(EdgeMarker::Gamma) {
            Some(assemble_boundary_mass(&mesh, EdgeMarker::Gamma, &|_| 1.0)?)
        } else {
            None
        };
        let gamma_length = mesh.marker_length(EdgeMarker::Gamma);
        let fingerprint = mesh.fingerprint();
        Ok(CellMesh { mesh, periodic, weights, volume, gamma_length, gamma_mass, h, fingerprint })
    }

    /// `M_{Y*}(u)`.
    pub fn mean(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>() / self.volume
    }

    /// `M_{Y*}(D)` with element-centroid evaluation.
    pub fn mean_coefficient(&self, d: &CoefficientField) -> Mat2 {
        let coeff = centroid_coefficients(&self.mesh, d);
        let mut m = [[0.0; 2]; 2];
        for (t, c) in coeff.iter().enumerate() {
            let a = self.mesh.area(t);
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += a * c[i][j];
                }
            }
        }
        m.map(|r| r.map(|v| v / self.volume))
    }
}

fn centroid_coefficients(mesh: &Mesh, d: &CoefficientField) -> Vec<Mat2> {
    (0..mesh.n_triangles()).into_par_iter().map(|t| d.eval(mesh.centroid(t))).collect()
}

/// Correctors for both unit directions. `second` is present for the coupled problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    /// `χʲ` (scalar problem) or `χ₁ʲ` (coupled problem), indexed by direction.
    pub first: [Vec<f64>; 2],
    /// `χ₂ʲ` for the coupled problem.
    pub second: Option<[Vec<f64>; 2]>,
    /// Exchange rate the coupled problem was solved with.
    pub exchange_rate: Option<f64>,
    pub fingerprint: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TensorForm {
    /// Average of the flux `D(e_j − ∇χʲ)`.
    ScalarForm,
    /// Energy `(1/|Y*|)∫ D(e_i − ∇χⁱ)·(e_j − ∇χʲ)`.
    ScalarEnergy,
    /// Sum of the two flux averages of the coupled correctors.
    CoupledForm,
    /// Two volume energies plus the interface exchange energy.
    CoupledEnergy,
}

/// A 2×2 effective matrix with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTensor {
    pub form: TensorForm,
    pub h: f64,
    pub s: Option<f64>,
    pub matrix: Mat2,
    pub min_eig: f64,
    /// Max-entry difference between the flux and energy evaluations on the same solution.
    pub cross_check_err: f64,
}

impl EffectiveTensor {
    fn new(form: TensorForm, h: f64, matrix: Mat2, other: &Mat2) -> Self {
        EffectiveTensor { form, h, s: None, matrix, min_eig: sym_eigenvalues(&matrix).0, cross_check_err: max_diff(&matrix, other) }
    }

    pub fn symmetry_error(&self) -> f64 {
        (self.matrix[0][1] - self.matrix[1][0]).abs()
    }
}

pub fn max_diff(a: &Mat2, b: &Mat2) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

fn grad(mesh: &Mesh, t: usize, u: &[f64]) -> [f64; 2] {
    let (g, _) = element_gradients(mesh, t);
    let tri = mesh.triangles[t];
    let mut r = [0.0; 2];
    for a in 0..3 {
        r[0] += u[tri[a]] * g[a][0];
        r[1] += u[tri[a]] * g[a][1];
    }
    r
}

/// Unnormalized flux and energy integrals of one corrector pair.
fn volume_terms(mesh: &Mesh, coeff: &[Mat2], chi: &[Vec<f64>; 2]) -> (Mat2, Mat2) {
    let mut flux = [[0.0; 2]; 2];
    let mut energy = [[0.0; 2]; 2];
    for t in 0..mesh.n_triangles() {
        let area = mesh.area(t);
        let d = &coeff[t];
        let g = [grad(mesh, t, &chi[0]), grad(mesh, t, &chi[1])];
        // w_j = e_j − ∇χʲ
        let w = [[1.0 - g[0][0], -g[0][1]], [-g[1][0], 1.0 - g[1][1]]];
        for j in 0..2 {
            let dw = [d[0][0] * w[j][0] + d[0][1] * w[j][1], d[1][0] * w[j][0] + d[1][1] * w[j][1]];
            for i in 0..2 {
                flux[i][j] += area * dw[i];
                if i <= j {
                    energy[i][j] += area * (w[i][0] * dw[0] + w[i][1] * dw[1]);
                }
            }
        }
    }
    energy[1][0] = energy[0][1];
    (flux, energy)
}

fn check_solution(cell: &CellMesh, sol: &CellSolution) -> Result<()> {
    let n = cell.mesh.n_nodes();
    let lens_ok = sol.first.iter().chain(sol.second.iter().flatten()).all(|v| v.len() == n);
    if sol.fingerprint != cell.fingerprint || !lens_ok {
        return Err(Error::MeshMismatch("corrector was computed on a different cell mesh".into()));
    }
    Ok(())
}

/// Solves the scalar cell problem for both directions with one factorization.
pub fn solve_scalar_cell(cell: &CellMesh, d: &CoefficientField) -> Result<CellSolution> {
    let coeff = centroid_coefficients(&cell.mesh, d);
    let k = assemble_stiffness_with(&cell.mesh, &coeff);
    let map = DofMap::new(cell.mesh.n_nodes(), Some(&cell.periodic), &[])?;
    let solver = MultiplierSolver::new(&map.restrict_matrix(&k), vec![vec![1.0; map.n_dofs]], vec![map.restrict_vec(&cell.weights)])?;
    let mut first: [Vec<f64>; 2] = [vec![], vec![]];
    for (j, slot) in first.iter_mut().enumerate() {
        let f = assemble_gradient_load(&cell.mesh, &coeff, j);
        let (x, _) = solver.solve(&map.restrict_vec(&f), &[0.0], CELL_SOLVE_TOL)?;
        *slot = map.expand(&x);
    }
    Ok(CellSolution { first, second: None, exchange_rate: None, fingerprint: cell.fingerprint.clone() })
}

/// Flux-form and energy-form scalar tensors; returns the requested one with the other as
/// cross-check.
pub fn effective_tensor_scalar(cell: &CellMesh, sol: &CellSolution, d: &CoefficientField, form: TensorForm) -> Result<EffectiveTensor> {
    check_solution(cell, sol)?;
    let coeff = centroid_coefficients(&cell.mesh, d);
    let (flux, energy) = volume_terms(&cell.mesh, &coeff, &sol.first);
    let flux = flux.map(|r| r.map(|v| v / cell.volume));
    let energy = energy.map(|r| r.map(|v| v / cell.volume));
    match form {
        TensorForm::ScalarForm => Ok(EffectiveTensor::new(form, cell.h, flux, &energy)),
        TensorForm::ScalarEnergy => Ok(EffectiveTensor::new(form, cell.h, energy, &flux)),
        _ => Err(Error::InvalidConfig(format!("{form:?} is not a scalar tensor form"))),
    }
}

/// Effective diffusion tensor (energy form) of `d` on `cell`.
pub fn effective_diffusion(cell: &CellMesh, d: &CoefficientField) -> Result<EffectiveTensor> {
    let sol = solve_scalar_cell(cell, d)?;
    effective_tensor_scalar(cell, &sol, d, TensorForm::ScalarEnergy)
}

/// Solves the coupled two-field cell problem for both directions.
pub fn solve_coupled_cell(cell: &CellMesh, d1: &CoefficientField, d2: &CoefficientField, exchange_rate: f64) -> Result<CellSolution> {
    solve_coupled_cell_impl(cell, d1, d2, exchange_rate, false)
}

/// Variant with the second field's forcing sign flipped; exists only so tests can confirm
/// that the reduction identities detect a sign error.
#[doc(hidden)]
pub fn solve_coupled_cell_flipped(cell: &CellMesh, d1: &CoefficientField, d2: &CoefficientField, exchange_rate: f64) -> Result<CellSolution> {
    solve_coupled_cell_impl(cell, d1, d2, exchange_rate, true)
}

fn solve_coupled_cell_impl(
    cell: &CellMesh,
    d1: &CoefficientField,
    d2: &CoefficientField,
    rate: f64,
    flip_second: bool,
) -> Result<CellSolution> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::DegenerateData(format!("exchange rate must be finite and nonnegative, got {rate}")));
    }
    let mesh = &cell.mesh;
    let n = mesh.n_nodes();
    let c1 = centroid_coefficients(mesh, d1);
    let c2 = centroid_coefficients(mesh, d2);
    let k1 = assemble_stiffness_with(mesh, &c1);
    let k2 = assemble_stiffness_with(mesh, &c2);
    let coupled = rate > 0.0 && cell.gamma_mass.is_some();
    let (a11, a22, a12) = match (&cell.gamma_mass, coupled) {
        (Some(bg), true) => {
            let hb = bg.scaled(rate);
            (k1.linear_combination(1.0, &hb, 1.0), k2.linear_combination(1.0, &hb, 1.0), hb.scaled(-1.0))
        }
        _ => (k1, k2, CsrMatrix::zeros(n, n)),
    };
    let full = CsrMatrix::block2(&a11, &a12, &a12, &a22);

    // periodic pairs of the second field are shifted copies of the first
    let mut pm = cell.periodic.clone();
    let shifted: Vec<(usize, usize)> = pm.pairs.iter().map(|&(m, s)| (m + n, s + n)).collect();
    pm.pairs.extend(shifted);
    let classes = pm.n_dofs;
    let second: Vec<usize> = pm.dof_of_node.iter().map(|&c| c + classes).collect();
    pm.dof_of_node.extend(second);
    pm.n_dofs *= 2;

    let map = DofMap::new(2 * n, Some(&pm), &[])?;
    let mut w1 = cell.weights.clone();
    w1.extend(std::iter::repeat(0.0).take(n));
    let mut w2 = vec![0.0; n];
    w2.extend_from_slice(&cell.weights);
    let (kernel, weights) = if coupled {
        (vec![vec![1.0; map.n_dofs]], vec![map.restrict_vec(&w1)])
    } else {
        let mut z1 = vec![0.0; map.n_dofs];
        let mut z2 = vec![0.0; map.n_dofs];
        for (k, d) in map.dof_of_node.iter().enumerate() {
            let d = d.expect("no Dirichlet nodes");
            if k < n {
                z1[d] = 1.0;
            } else {
                z2[d] = 1.0;
            }
        }
        (vec![z1, z2], vec![map.restrict_vec(&w1), map.restrict_vec(&w2)])
    };
    let g = vec![0.0; kernel.len()];
    let solver = MultiplierSolver::new(&map.restrict_matrix(&full), kernel, weights)?;
    let mut first: [Vec<f64>; 2] = [vec![], vec![]];
    let mut sec: [Vec<f64>; 2] = [vec![], vec![]];
    for j in 0..2 {
        let mut f = assemble_gradient_load(mesh, &c1, j);
        let f2 = assemble_gradient_load(mesh, &c2, j);
        let sign = if flip_second { -1.0 } else { 1.0 };
        f.extend(f2.iter().map(|v| sign * v));
        let (x, _) = solver.solve(&map.restrict_vec(&f), &g, CELL_SOLVE_TOL)?;
        let u = map.expand(&x);
        first[j] = u[..n].to_vec();
        sec[j] = u[n..].to_vec();
    }
    Ok(CellSolution { first, second: Some(sec), exchange_rate: Some(rate), fingerprint: cell.fingerprint.clone() })
}

/// Coupled dispersion tensor in flux or energy form; the other form is the cross-check.
pub fn effective_tensor_coupled(
    cell: &CellMesh,
    sol: &CellSolution,
    d1: &CoefficientField,
    d2: &CoefficientField,
    form: TensorForm,
) -> Result<EffectiveTensor> {
    check_solution(cell, sol)?;
    let (second, rate) = match (&sol.second, sol.exchange_rate) {
        (Some(s), Some(r)) => (s, r),
        _ => return Err(Error::MeshMismatch("scalar corrector passed where a coupled one is required".into())),
    };
    let c1 = centroid_coefficients(&cell.mesh, d1);
    let c2 = centroid_coefficients(&cell.mesh, d2);
    let (f1, e1) = volume_terms(&cell.mesh, &c1, &sol.first);
    let (f2, e2) = volume_terms(&cell.mesh, &c2, second);
    let mut flux = [[0.0; 2]; 2];
    let mut energy = [[0.0; 2]; 2];
    let jumps: Vec<Vec<f64>> =
        (0..2).map(|j| sol.first[j].iter().zip(&second[j]).map(|(a, b)| a - b).collect()).collect();
    for i in 0..2 {
        for j in 0..2 {
            flux[i][j] = (f1[i][j] + f2[i][j]) / cell.volume;
            let surface = match &cell.gamma_mass {
                Some(bg) if rate > 0.0 && i <= j => rate * bg.bilinear(&jumps[i], &jumps[j]),
                _ => 0.0,
            };
            energy[i][j] = (e1[i][j] + e2[i][j] + surface) / cell.volume;
        }
    }
    energy[1][0] = energy[0][1];
    let mut t = match form {
        TensorForm::CoupledForm => EffectiveTensor::new(form, cell.h, flux, &energy),
        TensorForm::CoupledEnergy => EffectiveTensor::new(form, cell.h, energy, &flux),
        _ => return Err(Error::InvalidConfig(format!("{form:?} is not a coupled tensor form"))),
    };
    t.s = None;
    Ok(t)
}

/// Dispersion tensor (energy form) for a given exchange rate `H(s)`.
pub fn dispersion_at_rate(cell: &CellMesh, d1: &CoefficientField, d2: &CoefficientField, rate: f64) -> Result<EffectiveTensor> {
    let sol = solve_coupled_cell(cell, d1, d2, rate)?;
    effective_tensor_coupled(cell, &sol, d1, d2, TensorForm::CoupledEnergy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::h1_seminorm;
    use crate::geometry::PointLocator;

    fn disc_cell(h: f64) -> CellMesh {
        CellMesh::build(&InclusionSpec::disc([0.5, 0.5], 0.25), h).unwrap()
    }

    #[test]
    fn no_inclusion_gives_zero_corrector() {
        let cell = CellMesh::build(&InclusionSpec::empty(), 0.1).unwrap();
        let d = CoefficientField::constant([[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let sol = solve_scalar_cell(&cell, &d).unwrap();
        assert!(sol.first.iter().flatten().all(|v| v.abs() < 1e-12));
        let t = effective_tensor_scalar(&cell, &sol, &d, TensorForm::ScalarForm).unwrap();
        assert!(max_diff(&t.matrix, &[[2.0, 0.0], [0.0, 1.0]]) < 1e-12);
    }

    #[test]
    fn disc_corrector_symmetry_and_mean() {
        let cell = disc_cell(0.05);
        let sol = solve_scalar_cell(&cell, &CoefficientField::identity()).unwrap();
        for chi in &sol.first {
            assert!(cell.mean(chi).abs() < 1e-10);
        }
        // χ¹ is odd under y1 ↦ 1 − y1 and even under y2 ↦ 1 − y2
        let loc = PointLocator::new(&cell.mesh);
        let mut worst: f64 = 0.0;
        for (k, p) in cell.mesh.nodes.iter().enumerate() {
            let mirror = [p[0], 1.0 - p[1]];
            let v = loc.interpolate_or_extrapolate(&sol.first[0], mirror);
            worst = worst.max((v - sol.first[0][k]).abs());
            let odd = loc.interpolate_or_extrapolate(&sol.first[0], [1.0 - p[0], p[1]]);
            worst = worst.max((odd + sol.first[0][k]).abs());
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn scalar_forms_agree_and_tensor_is_isotropic() {
        let cell = disc_cell(0.05);
        let d = CoefficientField::identity();
        let sol = solve_scalar_cell(&cell, &d).unwrap();
        let f = effective_tensor_scalar(&cell, &sol, &d, TensorForm::ScalarForm).unwrap();
        let e = effective_tensor_scalar(&cell, &sol, &d, TensorForm::ScalarEnergy).unwrap();
        assert!(f.cross_check_err <= 1e-9 && max_diff(&f.matrix, &e.matrix) <= 1e-9);
        assert!(e.matrix[0][1].abs() <= 1e-8);
        assert!((e.matrix[0][0] - e.matrix[1][1]).abs() <= 1e-8);
        assert!(e.min_eig > 0.0 && e.matrix[0][0] < 1.0);
        assert!(matches!(
            effective_tensor_scalar(&cell, &sol, &d, TensorForm::CoupledForm),
            Err(Error::InvalidConfig(_))
        ));
    }

    /// Fine-mesh value for `D = I` and a centered disc of radius 1/4: Richardson
    /// extrapolation of solves at h = 0.005 and h = 0.0025 (observed order 2).
    const DISC_QUARTER_D0: f64 = 0.835720814687;

    #[test]
    fn disc_tensor_matches_frozen_extrapolation() {
        for h in [0.05, 0.025, 0.0125] {
            let t = effective_diffusion(&disc_cell(h), &CoefficientField::identity()).unwrap();
            assert!((t.matrix[0][0] - DISC_QUARTER_D0).abs() <= h * h, "h = {h}: {}", t.matrix[0][0]);
            assert!(t.matrix[0][0] > DISC_QUARTER_D0);
        }
    }

    #[test]
    fn mesh_mismatch_is_detected() {
        let a = disc_cell(0.1);
        let b = disc_cell(0.05);
        let d = CoefficientField::identity();
        let sol = solve_scalar_cell(&a, &d).unwrap();
        assert!(matches!(effective_tensor_scalar(&b, &sol, &d, TensorForm::ScalarForm), Err(Error::MeshMismatch(_))));
    }

    #[test]
    fn self_convergence_of_corrector() {
        let d = CoefficientField::identity();
        let fine = disc_cell(0.00625);
        let reference = solve_scalar_cell(&fine, &d).unwrap();
        let errs: Vec<f64> = [0.05, 0.025, 0.0125]
            .iter()
            .map(|&h| {
                let cell = disc_cell(h);
                let sol = solve_scalar_cell(&cell, &d).unwrap();
                let loc = PointLocator::new(&cell.mesh);
                let diff: Vec<f64> = fine
                    .mesh
                    .nodes
                    .iter()
                    .zip(&reference.first[0])
                    .map(|(p, r)| loc.interpolate_or_extrapolate(&sol.first[0], *p) - r)
                    .collect();
                h1_seminorm(&fine.mesh, &diff)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 0.9, "errors {errs:?}");
        }
    }

    #[test]
    fn decoupled_limit_matches_scalar_problems() {
        let cell = disc_cell(0.05);
        let (d1, d2) = (CoefficientField::identity(), CoefficientField::constant([[2.0, 0.0], [0.0, 1.0]]).unwrap());
        let sol = solve_coupled_cell(&cell, &d1, &d2, 0.0).unwrap();
        let s1 = solve_scalar_cell(&cell, &d1).unwrap();
        let s2 = solve_scalar_cell(&cell, &d2).unwrap();
        let sec = sol.second.as_ref().unwrap();
        for j in 0..2 {
            for k in 0..cell.mesh.n_nodes() {
                assert!((sol.first[j][k] - s1.first[j][k]).abs() < 1e-10);
                assert!((sec[j][k] - s2.first[j][k]).abs() < 1e-10);
            }
        }
        let b = effective_tensor_coupled(&cell, &sol, &d1, &d2, TensorForm::CoupledEnergy).unwrap();
        let t1 = effective_tensor_scalar(&cell, &s1, &d1, TensorForm::ScalarEnergy).unwrap();
        let t2 = effective_tensor_scalar(&cell, &s2, &d2, TensorForm::ScalarEnergy).unwrap();
        let sum = [[t1.matrix[0][0] + t2.matrix[0][0], t1.matrix[0][1] + t2.matrix[0][1]], [
            t1.matrix[1][0] + t2.matrix[1][0],
            t1.matrix[1][1] + t2.matrix[1][1],
        ]];
        assert!(max_diff(&b.matrix, &sum) <= 1e-9);
    }

    #[test]
    fn equal_coefficients_collapse() {
        let cell = disc_cell(0.05);
        let d = CoefficientField::identity();
        let d0 = effective_diffusion(&cell, &d).unwrap();
        for rate in [0.0, 1.0, 10.0] {
            let sol = solve_coupled_cell(&cell, &d, &d, rate).unwrap();
            let sec = sol.second.as_ref().unwrap();
            assert!(sol.first[0].iter().zip(&sec[0]).all(|(a, b)| (a - b).abs() < 1e-10));
            let b = effective_tensor_coupled(&cell, &sol, &d, &d, TensorForm::CoupledEnergy).unwrap();
            assert!(max_diff(&b.matrix, &d0.matrix.map(|r| r.map(|v| 2.0 * v))) <= 1e-9);
        }
    }

    #[test]
    fn flipped_forcing_breaks_both_identities() {
        let cell = disc_cell(0.1);
        let (d1, d2) = (CoefficientField::identity(), CoefficientField::constant([[2.0, 0.0], [0.0, 1.0]]).unwrap());
        let good = dispersion_at_rate(&cell, &d1, &d1, 1.0).unwrap();
        let sol = solve_coupled_cell_flipped(&cell, &d1, &d1, 1.0).unwrap();
        let bad = effective_tensor_coupled(&cell, &sol, &d1, &d1, TensorForm::CoupledEnergy).unwrap();
        assert!(max_diff(&good.matrix, &bad.matrix) > 1e-3);
        let sol = solve_coupled_cell_flipped(&cell, &d1, &d2, 0.0).unwrap();
        let bad = effective_tensor_coupled(&cell, &sol, &d1, &d2, TensorForm::CoupledEnergy).unwrap();
        let good = dispersion_at_rate(&cell, &d1, &d2, 0.0).unwrap();
        assert!(max_diff(&good.matrix, &bad.matrix) > 1e-3);
    }

    #[test]
    fn coupled_forms_agree() {
        let cell = disc_cell(0.05);
        let (d1, d2) = (CoefficientField::identity(), CoefficientField::constant([[2.0, 0.0], [0.0, 1.0]]).unwrap());
        for rate in [0.0, 0.5, 1.0, 10.0] {
            let sol = solve_coupled_cell(&cell, &d1, &d2, rate).unwrap();
            let t = effective_tensor_coupled(&cell, &sol, &d1, &d2, TensorForm::CoupledForm).unwrap();
            assert!(t.cross_check_err <= 1e-9, "rate {rate}: {}", t.cross_check_err);
            assert!(cell.mean(&sol.first[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn approach_to_strong_coupling_limit() {
        let cell = disc_cell(0.05);
        let (d1, d2) = (CoefficientField::identity(), CoefficientField::constant([[2.0, 0.0], [0.0, 1.0]]).unwrap());
        let limit = solve_coupled_cell(&cell, &d1, &d2, 1e6).unwrap();
        let mut prev = f64::INFINITY;
        for rate in [0.1, 1.0, 10.0] {
            let sol = solve_coupled_cell(&cell, &d1, &d2, rate).unwrap();
            let mut dist = 0.0;
            for j in 0..2 {
                let a: Vec<f64> = sol.first[j].iter().zip(&limit.first[j]).map(|(x, y)| x - y).collect();
                let b: Vec<f64> = sol.second.as_ref().unwrap()[j]
                    .iter()
                    .zip(&limit.second.as_ref().unwrap()[j])
                    .map(|(x, y)| x - y)
                    .collect();
                dist += h1_seminorm(&cell.mesh, &a).powi(2) + h1_seminorm(&cell.mesh, &b).powi(2);
            }
            assert!(dist.sqrt() < prev);
            prev = dist.sqrt();
        }
    }

    #[test]
    fn negative_rate_rejected() {
        let cell = disc_cell(0.1);
        let d = CoefficientField::identity();
        assert!(matches!(solve_coupled_cell(&cell, &d, &d, -1.0), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn bounds_on_effective_tensor() {
        let cell = disc_cell(0.05);
        let d = CoefficientField::from_descriptor(&crate::fem::CoefficientDescriptor::Modulated {
            matrix: [[1.0, 0.2], [0.2, 1.5]],
            amplitude: 0.3,
        })
        .unwrap();
        let t = effective_diffusion(&cell, &d).unwrap();
        let mean = cell.mean_coefficient(&d);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for xi in [[1.0, 0.0], [0.0, 1.0], [s, s]] {
            let q = |m: &Mat2| (0..2).map(|i| (0..2).map(|j| xi[i] * m[i][j] * xi[j]).sum::<f64>()).sum::<f64>();
            assert!(q(&t.matrix) <= q(&mean) + 1e-12);
        }
        assert!(t.symmetry_error() <= 1e-10 && t.min_eig > 0.0);
    }
}
