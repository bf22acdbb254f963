//! Numerical periodic homogenization of coupled reaction–diffusion systems in perforated
//! domains.

pub mod cell_problems;
pub mod convergence;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod kinetics;
pub mod macro_solver;
pub mod micro_solver;

pub use error::{Error, ErrorClass, Result};
