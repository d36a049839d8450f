//! Periodic homogenization of a stationary diffusion problem with a
//! sign-changing Robin resistivity on a periodically perforated domain.
//!
//! The crate computes the effective model (A_hom, B, lambda, F) from three
//! periodic cell problems, solves the homogenized and fine-scale problems
//! with a P1 finite-element kernel, and verifies the two-scale limit
//! numerically through an epsilon-convergence study.

pub mod cell_problems;
pub mod coefficients;
pub mod effective_model;
pub mod error;
pub mod fem;
pub mod fine_solver;
pub mod macro_solver;
pub mod mesh;
pub mod quadrature;
pub mod sparse;
pub mod study;

pub use error::{Error, Result};
pub use mesh::{build_cell_mesh, tile_perforated_mesh, CellGeometry, EdgeTag, TriMesh};
