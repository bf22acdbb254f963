use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Point;
use crate::error::{Error, Result};

/// Boundary class of a mesh edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeMarker {
    /// Inclusion boundary Γ (or one of its ε-scaled translates).
    Gamma,
    /// Outer boundary ∂Ω.
    Outer,
    /// Cell face x = const, identified periodically.
    PeriodicX,
    /// Cell face y = const, identified periodically.
    PeriodicY,
    Interior,
}

impl EdgeMarker {
    pub fn label(self) -> &'static str {
        match self {
            EdgeMarker::Gamma => "GAMMA",
            EdgeMarker::Outer => "OUTER",
            EdgeMarker::PeriodicX => "PERX",
            EdgeMarker::PeriodicY => "PERY",
            EdgeMarker::Interior => "INTERIOR",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Some(match s {
            "GAMMA" => EdgeMarker::Gamma,
            "OUTER" => EdgeMarker::Outer,
            "PERX" => EdgeMarker::PeriodicX,
            "PERY" => EdgeMarker::PeriodicY,
            "INTERIOR" => EdgeMarker::Interior,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkedEdge {
    pub nodes: [usize; 2],
    pub marker: EdgeMarker,
}

/// Triangulated planar domain with marked boundary edges.
///
/// Only non-interior edges are stored in `edges`. `element_markers` carries a subdomain id
/// per triangle (the ε-cell index for perforated domains, 0 otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<MarkedEdge>,
    pub element_markers: Vec<usize>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Signed area of triangle `t` (positive when counter-clockwise).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn area(&self, t: usize) -> f64 {
        self.signed_area(t).abs()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Largest edge length of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        let d = |p: Point, q: Point| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        d(a, b).max(d(b, c)).max(d(c, a))
    }

    pub fn edge_length(&self, e: &MarkedEdge) -> f64 {
        let [a, b] = e.nodes.map(|i| self.nodes[i]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    pub fn edges_with(&self, marker: EdgeMarker) -> impl Iterator<Item = &MarkedEdge> + '_ {
        self.edges.iter().filter(move |e| e.marker == marker)
    }

    pub fn has_marker(&self, marker: EdgeMarker) -> bool {
        self.edges_with(marker).next().is_some()
    }

    /// Total length of the edges carrying `marker`.
    pub fn marker_length(&self, marker: EdgeMarker) -> f64 {
        self.edges_with(marker).map(|e| self.edge_length(e)).sum()
    }

    /// Node indices touched by edges carrying `marker`, sorted and deduplicated.
    pub fn marker_nodes(&self, marker: EdgeMarker) -> Vec<usize> {
        let mut v: Vec<usize> = self.edges_with(marker).flat_map(|e| e.nodes).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Edges belonging to exactly one triangle, as sorted node pairs in first-seen order.
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        let mut count: HashMap<[usize; 2], usize> = HashMap::new();
        let mut order = Vec::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                let c = count.entry(key).or_insert(0);
                if *c == 0 {
                    order.push(key);
                }
                *c += 1;
            }
        }
        order.into_iter().filter(|k| count[k] == 1).collect()
    }

    /// Number of connected components of the graph formed by edges with `marker`.
    pub fn marker_loops(&self, marker: EdgeMarker) -> usize {
        let nodes = self.marker_nodes(marker);
        let index: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut parent: Vec<usize> = (0..nodes.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in self.edges_with(marker) {
            let (a, b) = (find(&mut parent, index[&e.nodes[0]]), find(&mut parent, index[&e.nodes[1]]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        (0..nodes.len()).filter(|&i| find(&mut parent, i) == i).count()
    }

    /// Checks orientation and non-degeneracy of every triangle and index validity.
    pub fn validate(&self) -> Result<()> {
        if self.element_markers.len() != self.triangles.len() {
            return Err(Error::MeshFailure("element marker count mismatch".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= self.nodes.len()) {
                return Err(Error::MeshFailure(format!("triangle {t} references a missing node")));
            }
            if self.signed_area(t) <= 0.0 {
                return Err(Error::MeshFailure(format!(
                    "triangle {t} is inverted or degenerate (signed area {:e})",
                    self.signed_area(t)
                )));
            }
        }
        if let Some(e) = self.edges.iter().find(|e| e.nodes.iter().any(|&i| i >= self.nodes.len())) {
            return Err(Error::MeshFailure(format!("edge {:?} references a missing node", e.nodes)));
        }
        Ok(())
    }

    /// Stable content hash, used to tie solutions to the mesh they were computed on.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.nodes {
            h.update(p[0].to_bits().to_le_bytes());
            h.update(p[1].to_bits().to_le_bytes());
        }
        for t in &self.triangles {
            for &i in t {
                h.update((i as u64).to_le_bytes());
            }
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
