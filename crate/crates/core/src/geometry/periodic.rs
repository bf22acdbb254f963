use super::mesh::{EdgeMarker, Mesh};
use crate::error::{Error, Result};

/// Identification of nodes on opposite faces of a periodic cell.
///
/// Every equivalence class has one master (its smallest node index); all other members
/// are slaves. The four corners form a single class.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicMap {
    /// `(master, slave)` pairs, sorted by slave index.
    pub pairs: Vec<(usize, usize)>,
    /// Degree of freedom of every node after identification.
    pub dof_of_node: Vec<usize>,
    pub n_dofs: usize,
}

impl PeriodicMap {
    /// The trivial map on `n` nodes (no identification).
    pub fn identity(n: usize) -> Self {
        PeriodicMap { pairs: Vec::new(), dof_of_node: (0..n).collect(), n_dofs: n }
    }

    pub fn is_slave(&self, node: usize) -> bool {
        self.pairs.binary_search_by_key(&node, |p| p.1).is_ok()
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

/// Matches each node of one face with the node of the opposite face having the same
/// transverse coordinate (within `tol`).
fn match_faces(mesh: &Mesh, lo: &[usize], hi: &[usize], axis: usize, tol: f64) -> Result<Vec<(usize, usize)>> {
    let t = 1 - axis;
    let mut lo_sorted: Vec<usize> = lo.to_vec();
    lo_sorted.sort_by(|&a, &b| mesh.nodes[a][t].total_cmp(&mesh.nodes[b][t]));
    let mut hi_sorted: Vec<usize> = hi.to_vec();
    hi_sorted.sort_by(|&a, &b| mesh.nodes[a][t].total_cmp(&mesh.nodes[b][t]));
    let unmatched = |k: usize| Error::UnmatchedNode { x: mesh.nodes[k][0], y: mesh.nodes[k][1] };
    if lo_sorted.len() != hi_sorted.len() {
        let (longer, shorter) =
            if lo_sorted.len() > hi_sorted.len() { (&lo_sorted, &hi_sorted) } else { (&hi_sorted, &lo_sorted) };
        let k = longer
            .iter()
            .copied()
            .find(|&k| !shorter.iter().any(|&s| (mesh.nodes[s][t] - mesh.nodes[k][t]).abs() <= tol))
            .unwrap_or(longer[0]);
        return Err(unmatched(k));
    }
    let mut pairs = Vec::with_capacity(lo_sorted.len());
    for (&a, &b) in lo_sorted.iter().zip(&hi_sorted) {
        if (mesh.nodes[a][t] - mesh.nodes[b][t]).abs() > tol {
            return Err(unmatched(b));
        }
        pairs.push((a, b));
    }
    Ok(pairs)
}

/// Pairs nodes on opposite `PeriodicX` / `PeriodicY` faces.
///
/// `snap_tol` defaults to `1e-9 ×` the mesh diameter.
pub fn pair_periodic_nodes(mesh: &Mesh, snap_tol: Option<f64>) -> Result<PeriodicMap> {
    if !mesh.has_marker(EdgeMarker::PeriodicX) && !mesh.has_marker(EdgeMarker::PeriodicY) {
        return Err(Error::NoMarkedBoundary("PERX/PERY".into()));
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &mesh.nodes {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let diam = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
    let tol = snap_tol.unwrap_or(1e-9 * diam);

    let gamma = mesh.marker_nodes(EdgeMarker::Gamma);
    let mut parent: Vec<usize> = (0..mesh.n_nodes()).collect();
    for (axis, marker) in [(0, EdgeMarker::PeriodicX), (1, EdgeMarker::PeriodicY)] {
        let face = mesh.marker_nodes(marker);
        if face.is_empty() {
            continue;
        }
        if let Some(&k) = face.iter().find(|k| gamma.binary_search(k).is_ok()) {
            return Err(Error::InvalidGeometry(format!(
                "inclusion boundary node ({}, {}) lies on a periodic face",
                mesh.nodes[k][0], mesh.nodes[k][1]
            )));
        }
        let mut low = Vec::new();
        let mut high = Vec::new();
        for &k in &face {
            let x = mesh.nodes[k][axis];
            if (x - lo[axis]).abs() <= tol {
                low.push(k);
            } else if (x - hi[axis]).abs() <= tol {
                high.push(k);
            } else {
                return Err(Error::UnmatchedNode { x: mesh.nodes[k][0], y: mesh.nodes[k][1] });
            }
        }
        for (a, b) in match_faces(mesh, &low, &high, axis, tol)? {
            union(&mut parent, a, b);
        }
    }

    let mut pairs = Vec::new();
    let mut dof_of_node = vec![usize::MAX; mesh.n_nodes()];
    let mut n_dofs = 0;
    for k in 0..mesh.n_nodes() {
        let root = find(&mut parent, k);
        if root == k {
            dof_of_node[k] = n_dofs;
            n_dofs += 1;
        } else {
            dof_of_node[k] = dof_of_node[root];
            pairs.push((root, k));
        }
    }
    Ok(PeriodicMap { pairs, dof_of_node, n_dofs })
}
