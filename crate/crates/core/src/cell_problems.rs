//! The three periodic cell problems on Y_s.
//!
//! Correctors zeta_k solve div(A (e_k + grad zeta_k)) = 0 with the
//! conormal flux -A e_k . nu on Sigma; the resistivity potential gamma has
//! flux -alpha on Sigma; the auxiliary theta is the Laplace potential with
//! flux +alpha. All three live in the periodic quotient space, realized by
//! periodic node merging plus a zero-mean Lagrange multiplier.

use std::sync::Arc;

use crate::coefficients::{MatrixField, SurfaceResistivity};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_flux_load, assemble_load_surface, ConstraintSpec, FEFunction, FormDescriptor,
    SparseSystem,
};
use crate::mesh::{EdgeTag, TriMesh};

/// Default relative residual for the cell solves; tight because the
/// homogenized coefficients reuse the discrete Galerkin identities.
pub const CELL_SOLVE_TOL: f64 = 1e-12;

/// Solvability threshold on the discrete surface mean of alpha.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default)]
pub struct CellResiduals {
    pub zeta: [f64; 2],
    pub gamma: f64,
    pub theta: f64,
}

/// One cell mesh with its four solutions, all with zero volume mean.
#[derive(Debug, Clone)]
pub struct CellSolutionSet {
    mesh: Arc<TriMesh>,
    pub zeta: [FEFunction; 2],
    pub gamma: FEFunction,
    pub theta: FEFunction,
    pub residuals: CellResiduals,
}

impl CellSolutionSet {
    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    /// Solve all four problems on one mesh.
    pub fn solve(
        mesh: &Arc<TriMesh>,
        a: &MatrixField,
        alpha: &SurfaceResistivity,
        tol: f64,
    ) -> Result<Self> {
        let mut residuals = CellResiduals::default();
        let zeta0 = solve_corrector_with_residual(mesh, a, 1, tol, &mut residuals.zeta[0])?;
        let zeta1 = solve_corrector_with_residual(mesh, a, 2, tol, &mut residuals.zeta[1])?;
        let gamma = solve_gamma_with_residual(mesh, a, alpha, tol, &mut residuals.gamma)?;
        let theta = solve_theta_with_residual(mesh, alpha, tol, &mut residuals.theta)?;
        Ok(CellSolutionSet {
            mesh: mesh.clone(),
            zeta: [zeta0, zeta1],
            gamma,
            theta,
            residuals,
        })
    }
}

fn hole_center(mesh: &TriMesh) -> Result<[f64; 2]> {
    Ok(mesh
        .cell_geometry
        .ok_or_else(|| Error::MeshMismatch("cell mesh carries no geometry".into()))?
        .hole_center)
}

/// Surface load of alpha over Sigma, or zeros when the cell has no hole.
fn alpha_surface_load(mesh: &TriMesh, alpha: &SurfaceResistivity) -> Result<Vec<f64>> {
    if !mesh.has_tag(EdgeTag::Sigma) {
        return Ok(vec![0.0; mesh.num_vertices()]);
    }
    let center = hole_center(mesh)?;
    assemble_load_surface(mesh, EdgeTag::Sigma, &|p| alpha.eval_at(p, center))
}

fn check_compatible(load: &[f64]) -> Result<()> {
    // Sum of the surface load entries is the discrete integral of alpha.
    let mean: f64 = load.iter().sum();
    if mean.abs() > COMPATIBILITY_TOL {
        return Err(Error::Incompatible { mean });
    }
    Ok(())
}

/// Corrector zeta_k (k is 1 or 2): find the periodic zero-mean zeta with
/// integral A (e_k + grad zeta) . grad v = 0 for all periodic v.
pub fn solve_corrector(
    mesh: &Arc<TriMesh>,
    a: &MatrixField,
    k: usize,
    tol: f64,
) -> Result<FEFunction> {
    let mut residual = 0.0;
    solve_corrector_with_residual(mesh, a, k, tol, &mut residual)
}

fn solve_corrector_with_residual(
    mesh: &Arc<TriMesh>,
    a: &MatrixField,
    k: usize,
    tol: f64,
    residual: &mut f64,
) -> Result<FEFunction> {
    assert!(k == 1 || k == 2, "corrector direction must be 1 or 2");
    let col = k - 1;
    let mut sys = SparseSystem::new(mesh.clone());
    sys.add_bilinear(&FormDescriptor::Diffusion(&|y| a.eval(y)))?;
    let load = assemble_flux_load(mesh, &|y| {
        let m = a.eval(y);
        [m[0][col], m[1][col]]
    });
    sys.add_scaled_rhs(&load, -1.0);
    sys.apply_constraints(&ConstraintSpec::periodic_zero_mean())?;
    let u = sys.solve(tol)?;
    *residual = sys.reduced_residual(&u).unwrap_or(0.0);
    Ok(u)
}

/// Resistivity potential: integral A grad gamma . grad v = -integral alpha v
/// over Sigma, for all periodic v; requires the discretely corrected alpha.
pub fn solve_gamma(
    mesh: &Arc<TriMesh>,
    a: &MatrixField,
    alpha: &SurfaceResistivity,
    tol: f64,
) -> Result<FEFunction> {
    let mut residual = 0.0;
    solve_gamma_with_residual(mesh, a, alpha, tol, &mut residual)
}

fn solve_gamma_with_residual(
    mesh: &Arc<TriMesh>,
    a: &MatrixField,
    alpha: &SurfaceResistivity,
    tol: f64,
    residual: &mut f64,
) -> Result<FEFunction> {
    let load = alpha_surface_load(mesh, alpha)?;
    check_compatible(&load)?;
    let mut sys = SparseSystem::new(mesh.clone());
    sys.add_bilinear(&FormDescriptor::Diffusion(&|y| a.eval(y)))?;
    sys.add_scaled_rhs(&load, -1.0);
    sys.apply_constraints(&ConstraintSpec::periodic_zero_mean())?;
    let u = sys.solve(tol)?;
    *residual = sys.reduced_residual(&u).unwrap_or(0.0);
    Ok(u)
}

/// Auxiliary potential of the surface-identity lemma: -Laplace theta = 0
/// with grad theta . nu = alpha on Sigma, periodic and zero mean.
pub fn solve_theta(
    mesh: &Arc<TriMesh>,
    alpha: &SurfaceResistivity,
    tol: f64,
) -> Result<FEFunction> {
    let mut residual = 0.0;
    solve_theta_with_residual(mesh, alpha, tol, &mut residual)
}

fn solve_theta_with_residual(
    mesh: &Arc<TriMesh>,
    alpha: &SurfaceResistivity,
    tol: f64,
    residual: &mut f64,
) -> Result<FEFunction> {
    let load = alpha_surface_load(mesh, alpha)?;
    check_compatible(&load)?;
    let mut sys = SparseSystem::new(mesh.clone());
    sys.add_bilinear(&FormDescriptor::Diffusion(&|_| [[1.0, 0.0], [0.0, 1.0]]))?;
    sys.add_rhs(&load);
    sys.apply_constraints(&ConstraintSpec::periodic_zero_mean())?;
    let u = sys.solve(tol)?;
    *residual = sys.reduced_residual(&u).unwrap_or(0.0);
    Ok(u)
}
