use super::solve::DirectSolver;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::geometry::PeriodicMap;

/// Constraints applied to an assembled nodal system.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    /// Periodic identification (slave nodes are eliminated into their masters).
    pub periodic: Option<PeriodicMap>,
    /// Prescribed nodal values.
    pub dirichlet: Vec<(usize, f64)>,
    /// Linear functionals `Σ w_a u_a = 0`, one Lagrange multiplier each. Nodal weights
    /// `w_a = ∫_{Y*} φ_a` realize a zero mean over the subdomain.
    pub mean_zero: Vec<Vec<f64>>,
}

/// Node-to-unknown map after periodic folding and Dirichlet elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub dof_of_node: Vec<Option<usize>>,
    pub fixed: Vec<Option<f64>>,
    pub n_dofs: usize,
}

impl DofMap {
    pub fn new(n_nodes: usize, periodic: Option<&PeriodicMap>, dirichlet: &[(usize, f64)]) -> Result<Self> {
        let mut fixed: Vec<Option<f64>> = vec![None; n_nodes];
        for &(k, v) in dirichlet {
            if k >= n_nodes {
                return Err(Error::ConflictingConstraints(format!("Dirichlet node {k} out of range")));
            }
            match fixed[k] {
                Some(old) if old != v => {
                    return Err(Error::ConflictingConstraints(format!("node {k} prescribed both {old} and {v}")))
                }
                _ => fixed[k] = Some(v),
            }
        }
        let mut dof_of_node = vec![None; n_nodes];
        let mut n_dofs = 0;
        match periodic {
            Some(pm) => {
                if pm.dof_of_node.len() != n_nodes {
                    return Err(Error::ConflictingConstraints("periodic map size mismatch".into()));
                }
                for &(m, s) in &pm.pairs {
                    if fixed[m].is_some() || fixed[s].is_some() {
                        return Err(Error::ConflictingConstraints(format!(
                            "node {} is both periodic and Dirichlet",
                            if fixed[m].is_some() { m } else { s }
                        )));
                    }
                }
                let mut class_dof = vec![usize::MAX; pm.n_dofs];
                for k in 0..n_nodes {
                    if fixed[k].is_some() {
                        continue;
                    }
                    let c = pm.dof_of_node[k];
                    if class_dof[c] == usize::MAX {
                        class_dof[c] = n_dofs;
                        n_dofs += 1;
                    }
                    dof_of_node[k] = Some(class_dof[c]);
                }
            }
            None => {
                for k in 0..n_nodes {
                    if fixed[k].is_none() {
                        dof_of_node[k] = Some(n_dofs);
                        n_dofs += 1;
                    }
                }
            }
        }
        Ok(DofMap { dof_of_node, fixed, n_dofs })
    }

    /// Homogeneous Dirichlet conditions on `nodes`.
    pub fn dirichlet_zero(n_nodes: usize, nodes: &[usize]) -> Self {
        let d: Vec<(usize, f64)> = nodes.iter().map(|&k| (k, 0.0)).collect();
        Self::new(n_nodes, None, &d).expect("valid homogeneous Dirichlet set")
    }

    pub fn n_nodes(&self) -> usize {
        self.dof_of_node.len()
    }

    /// `Pᵀ A P`.
    pub fn restrict_matrix(&self, a: &CsrMatrix) -> CsrMatrix {
        let trips: Vec<(usize, usize, f64)> = a
            .triplets()
            .filter_map(|(i, j, v)| Some((self.dof_of_node[i]?, self.dof_of_node[j]?, v)))
            .collect();
        CsrMatrix::from_triplets(self.n_dofs, self.n_dofs, trips)
    }

    /// `Pᵀ b`.
    pub fn restrict_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.n_dofs];
        for (k, &v) in b.iter().enumerate() {
            if let Some(d) = self.dof_of_node[k] {
                r[d] += v;
            }
        }
        r
    }

    /// `Pᵀ (b − A g)` where `g` holds the prescribed values.
    pub fn restrict_rhs(&self, a: &CsrMatrix, b: &[f64]) -> Vec<f64> {
        if self.fixed.iter().all(|f| f.map_or(true, |v| v == 0.0)) {
            return self.restrict_vec(b);
        }
        let g: Vec<f64> = self.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
        let ag = a.mul_vec(&g);
        let lifted: Vec<f64> = b.iter().zip(&ag).map(|(bi, gi)| bi - gi).collect();
        self.restrict_vec(&lifted)
    }

    /// Nodal field from unknowns (prescribed values filled in).
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        self.dof_of_node
            .iter()
            .zip(&self.fixed)
            .map(|(d, f)| match (d, f) {
                (Some(d), _) => x[*d],
                (None, Some(v)) => *v,
                (None, None) => 0.0,
            })
            .collect()
    }

    /// Unknown values of a nodal field (value of the first node of each class).
    pub fn gather(&self, u: &[f64]) -> Vec<f64> {
        let mut x = vec![f64::NAN; self.n_dofs];
        for (k, d) in self.dof_of_node.iter().enumerate() {
            if let Some(d) = d {
                if x[*d].is_nan() {
                    x[*d] = u[k];
                }
            }
        }
        x
    }
}

/// Constrained system with trailing Lagrange multiplier unknowns.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub map: DofMap,
    pub n_multipliers: usize,
}

impl ReducedSystem {
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        self.map.expand(&x[..self.map.n_dofs])
    }

    pub fn multipliers<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.map.n_dofs..]
    }
}

/// Folds periodic slaves into masters, eliminates Dirichlet nodes and borders the system
/// with one multiplier row per mean-zero functional.
pub fn apply_constraints(a: &CsrMatrix, b: &[f64], cs: &ConstraintSet) -> Result<ReducedSystem> {
    let n = a.nrows;
    if b.len() != n || a.ncols != n {
        return Err(Error::ConflictingConstraints("system size mismatch".into()));
    }
    let map = DofMap::new(n, cs.periodic.as_ref(), &cs.dirichlet)?;
    let nd = map.n_dofs;
    let k = cs.mean_zero.len();
    let mut trips: Vec<(usize, usize, f64)> = a
        .triplets()
        .filter_map(|(i, j, v)| Some((map.dof_of_node[i]?, map.dof_of_node[j]?, v)))
        .collect();
    let mut rhs = map.restrict_rhs(a, b);
    for (c, w) in cs.mean_zero.iter().enumerate() {
        if w.len() != n {
            return Err(Error::ConflictingConstraints("mean-zero weight length mismatch".into()));
        }
        let wr = map.restrict_vec(w);
        for (d, &v) in wr.iter().enumerate() {
            if v != 0.0 {
                trips.push((nd + c, d, v));
                trips.push((d, nd + c, v));
            }
        }
        let fixed_part: f64 = w.iter().zip(&map.fixed).filter_map(|(wi, f)| f.map(|g| wi * g)).sum();
        rhs.push(-fixed_part);
    }
    Ok(ReducedSystem { matrix: CsrMatrix::from_triplets(nd + k, nd + k, trips), rhs, map, n_multipliers: k })
}

/// Exact solver for the bordered system `[A Wᵀ; W 0] [x; λ] = [f; g]` when the kernel of
/// the symmetric matrix `A` is spanned by known vectors `Z` and `WZ` is invertible.
///
/// The multipliers follow from `Zᵀf = ZᵀWᵀλ`; the deflated system is factorized with one
/// pinned unknown per kernel vector and the kernel components are then fixed by `Wx = g`.
/// This avoids factorizing the dense border rows, which fill in badly.
pub struct MultiplierSolver {
    matrix: CsrMatrix,
    kernel: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    keep: Vec<Option<usize>>,
    solver: DirectSolver,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting for the tiny multiplier systems.
fn solve_small(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        if m[p][c].abs() < 1e-300 {
            return Err(Error::SingularSystem("constraint weights are orthogonal to the kernel".into()));
        }
        m.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    Ok(x)
}

impl MultiplierSolver {
    pub fn new(a: &CsrMatrix, kernel: Vec<Vec<f64>>, weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = a.nrows;
        if kernel.len() != weights.len() || kernel.iter().chain(&weights).any(|v| v.len() != n) {
            return Err(Error::ConflictingConstraints("kernel and weight vectors must match the system".into()));
        }
        let mut keep: Vec<Option<usize>> = vec![Some(0); n];
        for (k, z) in kernel.iter().enumerate() {
            let pin = (0..n)
                .filter(|&i| z[i] != 0.0 && kernel.iter().enumerate().all(|(l, y)| l == k || y[i] == 0.0))
                .max_by(|&i, &j| z[i].abs().total_cmp(&z[j].abs()).then(j.cmp(&i)))
                .ok_or_else(|| Error::ConflictingConstraints("kernel vectors have no private support".into()))?;
            keep[pin] = None;
        }
        let mut next = 0;
        for slot in keep.iter_mut().flatten() {
            *slot = next;
            next += 1;
        }
        let trips: Vec<(usize, usize, f64)> =
            a.triplets().filter_map(|(i, j, v)| Some((keep[i]?, keep[j]?, v))).collect();
        let pinned = CsrMatrix::from_triplets(next, next, trips);
        let solver = DirectSolver::new(&pinned)?;
        Ok(MultiplierSolver { matrix: a.clone(), kernel, weights, keep, solver })
    }

    /// Returns `(x, λ)` with relative residual of the bordered system at most `tol`.
    pub fn solve(&self, f: &[f64], g: &[f64], tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let k = self.kernel.len();
        let zw: Vec<Vec<f64>> =
            self.kernel.iter().map(|z| self.weights.iter().map(|w| dot(z, w)).collect()).collect();
        let lambda = solve_small(zw.clone(), self.kernel.iter().map(|z| dot(z, f)).collect())?;
        let mut r = f.to_vec();
        for (l, w) in self.weights.iter().enumerate() {
            r.iter_mut().zip(w).for_each(|(ri, wi)| *ri -= lambda[l] * wi);
        }
        let rp: Vec<f64> = r.iter().zip(&self.keep).filter(|(_, k)| k.is_some()).map(|(v, _)| *v).collect();
        let yp = self.solver.solve(&rp, tol)?;
        let mut x: Vec<f64> = self.keep.iter().map(|k| k.map_or(0.0, |i| yp[i])).collect();
        let wz: Vec<Vec<f64>> = (0..k).map(|l| (0..k).map(|c| zw[c][l]).collect()).collect();
        let c = solve_small(wz, (0..k).map(|l| g[l] - dot(&self.weights[l], &x)).collect())?;
        for (ck, z) in c.iter().zip(&self.kernel) {
            x.iter_mut().zip(z).for_each(|(xi, zi)| *xi += ck * zi);
        }
        let mut res = self.matrix.mul_vec(&x);
        for (l, w) in self.weights.iter().enumerate() {
            res.iter_mut().zip(w).for_each(|(ri, wi)| *ri += lambda[l] * wi);
        }
        let mut rn: f64 = res.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum();
        rn += (0..k).map(|l| (dot(&self.weights[l], &x) - g[l]).powi(2)).sum::<f64>();
        let scale = (dot(f, f) + dot(g, g)).sqrt();
        let rel = if scale > 0.0 { rn.sqrt() / scale } else { rn.sqrt() };
        if !(rel <= tol) {
            return Err(Error::NoConvergence { iterations: 1, residual: rel });
        }
        Ok((x, lambda))
    }
}
