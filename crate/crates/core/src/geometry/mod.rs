//! Meshes for the perforated unit cell, the macroscopic domain and the ε-periodic
//! perforated domain.

mod inclusion;
mod io;
mod locate;
mod mesh;
mod mesher;
mod periodic;

pub use inclusion::{InclusionSpec, INCLUSION_MARGIN};
pub use io::{read_mesh, write_mesh};
pub use locate::PointLocator;
pub use mesh::{EdgeMarker, MarkedEdge, Mesh};
pub use mesher::{
    build_epsilon_mesh, build_macro_mesh, build_unit_cell_mesh, EpsilonDomainSpec, EpsilonMesh,
    RectDomain, DEFAULT_NODE_CAP,
};
pub use periodic::{pair_periodic_nodes, PeriodicMap};

/// A point in the plane.
pub type Point = [f64; 2];
