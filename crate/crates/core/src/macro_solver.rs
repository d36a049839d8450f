//! Homogenized problem on the unperforated domain and the two-scale
//! corrector reconstruction.

use std::sync::Arc;

use crate::cell_problems::CellSolutionSet;
use crate::coefficients::symmetric_part_eigenvalues;
use crate::effective_model::HomogenizedModel;
use crate::error::{Error, Result};
use crate::fem::{assemble_load_volume, ConstraintSpec, FEFunction, FormDescriptor, SparseSystem};
use crate::mesh::{build_cell_mesh, tile_perforated_mesh, CellGeometry, EdgeTag, GridLocator, TriMesh};

/// Structured no-hole mesh of Omega = (0,1)^2 with GAMMA tagged, step 2^-l.
pub fn build_macro_mesh(l: u32) -> Result<TriMesh> {
    let cell = build_cell_mesh(&CellGeometry {
        hole_center: [0.5, 0.5],
        hole_radius: 0.0,
        refinement: l,
    })?;
    tile_perforated_mesh(&cell, 1)
}

/// Galerkin solution of the homogenized diffusion-convection-reaction
/// problem with Dirichlet zero boundary.
pub struct MacroSolution {
    pub u: FEFunction,
    pub model: HomogenizedModel,
    /// Mesh Peclet number |B| h / (2 lambda_min(A_hom_sym)).
    pub peclet: f64,
    locator: GridLocator,
}

impl MacroSolution {
    pub fn mesh(&self) -> &Arc<TriMesh> {
        self.u.mesh()
    }

    /// Interpolated value at an arbitrary point of Omega.
    pub fn value(&self, x: [f64; 2]) -> Option<f64> {
        let (t, bary) = self.locator.locate(self.u.mesh(), x)?;
        Some(self.u.value_in(t, bary))
    }

    /// Piecewise-constant gradient at an arbitrary point of Omega.
    pub fn gradient(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        let (t, _) = self.locator.locate(self.u.mesh(), x)?;
        Some(self.u.gradient_on(t))
    }
}

/// Solve the homogenized problem on a no-hole macro mesh.
pub fn solve_homogenized(
    model: &HomogenizedModel,
    macro_mesh: &Arc<TriMesh>,
    tol: f64,
) -> Result<MacroSolution> {
    if !macro_mesh.has_tag(EdgeTag::Gamma) {
        return Err(Error::MissingTag(EdgeTag::Gamma));
    }
    let (lo, _) = symmetric_part_eigenvalues(&model.a_hom);
    if lo <= 0.0 {
        return Err(Error::NotElliptic { m: lo });
    }
    let b_norm = (model.b[0] * model.b[0] + model.b[1] * model.b[1]).sqrt();
    let peclet = b_norm * macro_mesh.h_max / (2.0 * lo);

    let mut sys = SparseSystem::new(macro_mesh.clone());
    sys.add_bilinear(&FormDescriptor::Diffusion(&|_| model.a_hom))?;
    if b_norm > 0.0 {
        sys.add_bilinear(&FormDescriptor::Convection(model.b))?;
    }
    let lambda = model.lambda;
    sys.add_bilinear(&FormDescriptor::VolumeReaction(&|_| lambda))?;
    let load = assemble_load_volume(macro_mesh, &|x| model.f_macro.eval(x, [0.0, 0.0]));
    sys.add_rhs(&load);
    sys.apply_constraints(&ConstraintSpec::dirichlet_zero(EdgeTag::Gamma))?;
    let u = sys.solve(tol)?;

    let locator = GridLocator::new(macro_mesh);
    Ok(MacroSolution {
        u,
        model: model.clone(),
        peclet,
        locator,
    })
}

/// Evaluator of the first-order two-scale term
/// u1(x,y) = sum_k zeta_k(y) du/dx_k (x) + gamma(y) u(x).
pub struct U1Evaluator<'a> {
    sol: &'a MacroSolution,
    cells: &'a CellSolutionSet,
    cell_locator: GridLocator,
}

/// Build the u1 evaluator; the macro solution must have been produced from
/// the same cell mesh as the cell solutions.
pub fn reconstruct_u1<'a>(
    sol: &'a MacroSolution,
    cells: &'a CellSolutionSet,
) -> Result<U1Evaluator<'a>> {
    if sol.model.provenance.cell_mesh_id != cells.mesh().id() {
        return Err(Error::ProvenanceMismatch(format!(
            "model built on cell mesh {:x}, cell solutions on {:x}",
            sol.model.provenance.cell_mesh_id,
            cells.mesh().id()
        )));
    }
    Ok(U1Evaluator {
        sol,
        cells,
        cell_locator: GridLocator::new(cells.mesh()),
    })
}

/// Wrap a coordinate into [0,1); values like 1.0 - 1e-17 stay put.
fn wrap_unit(v: f64) -> f64 {
    let w = v.rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

impl<'a> U1Evaluator<'a> {
    fn macro_data(&self, x: [f64; 2]) -> Option<(f64, [f64; 2])> {
        let (t, bary) = self.sol.locator.locate(self.sol.u.mesh(), x)?;
        Some((self.sol.u.value_in(t, bary), self.sol.u.gradient_on(t)))
    }

    fn cell_triangle(&self, y: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let wrapped = [wrap_unit(y[0]), wrap_unit(y[1])];
        self.cell_locator.locate(self.cells.mesh(), wrapped)
    }

    /// u1(x, y); y is wrapped into the unit cell.
    pub fn eval(&self, x: [f64; 2], y: [f64; 2]) -> Option<f64> {
        let (u, grad_u) = self.macro_data(x)?;
        let (t, bary) = self.cell_triangle(y)?;
        let z1 = self.cells.zeta[0].value_in(t, bary);
        let z2 = self.cells.zeta[1].value_in(t, bary);
        let g = self.cells.gamma.value_in(t, bary);
        Some(z1 * grad_u[0] + z2 * grad_u[1] + g * u)
    }

    /// grad_y u1(x, y).
    pub fn grad_y(&self, x: [f64; 2], y: [f64; 2]) -> Option<[f64; 2]> {
        let (u, grad_u) = self.macro_data(x)?;
        let (t, _) = self.cell_triangle(y)?;
        let gz1 = self.cells.zeta[0].gradient_on(t);
        let gz2 = self.cells.zeta[1].gradient_on(t);
        let gg = self.cells.gamma.gradient_on(t);
        Some([
            gz1[0] * grad_u[0] + gz2[0] * grad_u[1] + gg[0] * u,
            gz1[1] * grad_u[0] + gz2[1] * grad_u[1] + gg[1] * u,
        ])
    }
}

/// Evaluator of x -> u(x) + eps u1(x, x/eps) and of the corrected gradient
/// grad u + grad_y u1(x, x/eps). The O(eps) term eps grad_x u1 is dropped:
/// P1 macro gradients are piecewise constant, so the term is both small and
/// discontinuous.
pub struct CorrectedField<'a> {
    u1: U1Evaluator<'a>,
    eps_inv: f64,
    eps: f64,
}

pub fn corrected_field<'a>(
    sol: &'a MacroSolution,
    cells: &'a CellSolutionSet,
    eps: f64,
) -> Result<CorrectedField<'a>> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps {eps} must be positive")));
    }
    Ok(CorrectedField {
        u1: reconstruct_u1(sol, cells)?,
        eps_inv: 1.0 / eps,
        eps,
    })
}

impl<'a> CorrectedField<'a> {
    fn micro_point(&self, x: [f64; 2]) -> [f64; 2] {
        [
            (x[0] * self.eps_inv).rem_euclid(1.0),
            (x[1] * self.eps_inv).rem_euclid(1.0),
        ]
    }

    pub fn value(&self, x: [f64; 2]) -> Option<f64> {
        let (u, _) = self.u1.macro_data(x)?;
        let y = self.micro_point(x);
        Some(u + self.eps * self.u1.eval(x, y)?)
    }

    pub fn gradient(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        let (_, grad_u) = self.u1.macro_data(x)?;
        let y = self.micro_point(x);
        let gy = self.u1.grad_y(x, y)?;
        Some([grad_u[0] + gy[0], grad_u[1] + gy[1]])
    }
}
