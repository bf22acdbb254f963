//! P1 finite elements: coefficient fields, assembly, constraints and sparse solves.

mod assembly;
mod coefficient;
mod constraints;
mod pair;
mod solve;
mod sparse;

pub use assembly::{
    assemble_boundary_mass, assemble_boundary_mass_with, assemble_gradient_load, assemble_lumped_mass,
    assemble_mass, assemble_stiffness, assemble_stiffness_with, element_gradients, l2_norm, h1_seminorm,
};
pub use coefficient::{sym_eigenvalues, CoefficientDescriptor, CoefficientField, Mat2};
pub use constraints::{apply_constraints, ConstraintSet, DofMap, MultiplierSolver, ReducedSystem};
pub use pair::solve_exchange_pair;
pub use solve::{solve_cg, solve_direct, solve_sparse, DirectSolver, SolveOptions, SolverKind};
pub use sparse::CsrMatrix;
