//! Homogenized coefficients computed from the cell solutions.
//!
//! Each coefficient is evaluated with the same quadrature as the assembly,
//! so the algebraically equivalent forms below agree to solver precision:
//!
//! * A_hom: definition form integral (A (e_j + grad zeta_j))_i versus the
//!   energy form integral A (e_j + grad zeta_j) . (e_i + grad zeta_i);
//! * B: the surface form, the gamma-equation substitution, and the
//!   antisymmetric form integral grad(gamma)^T (A - A^T) grad(zeta_i);
//! * lambda: the surface form integral alpha gamma + mu_tilde versus the
//!   energy form -integral A grad gamma . grad gamma + mu_tilde.

use serde::{Deserialize, Serialize};

use crate::cell_problems::CellSolutionSet;
use crate::coefficients::{
    symmetric_part_eigenvalues, CoefficientSet, Factor, MatrixField, ScalarVolumeField,
    SourceField, SourceTerm, SurfaceResistivity,
};
use crate::error::{Error, Result};
use crate::fem::FEFunction;
use crate::mesh::{EdgeTag, TriMesh};
use crate::quadrature::{edge_points, tri_points, EDGE_GAUSS2, TRI_MIDPOINT};

/// The effective macro model of the two-scale limit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomogenizedModel {
    #[serde(rename = "A_hom")]
    pub a_hom: [[f64; 2]; 2],
    #[serde(rename = "B")]
    pub b: [f64; 2],
    pub lambda: f64,
    pub mu_tilde: f64,
    #[serde(rename = "F")]
    pub f_macro: SourceField,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub cell_mesh_id: u64,
    pub coefficient_hash: u64,
}

impl HomogenizedModel {
    /// Re-assert the model invariants: positive definite symmetric part and
    /// lambda <= mu_tilde.
    pub fn validate(&self) -> Result<()> {
        let (lo, _) = symmetric_part_eigenvalues(&self.a_hom);
        if lo <= 0.0 {
            return Err(Error::NotElliptic { m: lo });
        }
        if self.lambda > self.mu_tilde + 1e-12 * self.mu_tilde.abs().max(1.0) {
            return Err(Error::Config(format!(
                "lambda {} exceeds mu_tilde {}",
                self.lambda, self.mu_tilde
            )));
        }
        Ok(())
    }
}

fn check_same_mesh(cells: &CellSolutionSet, f: &FEFunction) -> Result<()> {
    if f.mesh().id() != cells.mesh().id() {
        return Err(Error::MeshMismatch(
            "cell solution does not belong to the cell mesh".into(),
        ));
    }
    Ok(())
}

/// integral over Y_s of (A q) . p for piecewise fields built from an offset
/// direction and an optional P1 gradient.
fn volume_flux_integral(
    mesh: &TriMesh,
    a: &MatrixField,
    dir_q: [f64; 2],
    grad_q: Option<&FEFunction>,
    dir_p: [f64; 2],
    grad_p: Option<&FEFunction>,
) -> f64 {
    let mut acc = 0.0;
    for t in 0..mesh.num_triangles() {
        let p = mesh.triangle_points(t);
        let area = 0.5 * mesh.double_area(t);
        let gq = grad_q.map_or([0.0; 2], |f| f.gradient_on(t));
        let gp = grad_p.map_or([0.0; 2], |f| f.gradient_on(t));
        let q = [dir_q[0] + gq[0], dir_q[1] + gq[1]];
        let pv = [dir_p[0] + gp[0], dir_p[1] + gp[1]];
        let pts = tri_points(&p);
        for (qi, (_, w)) in TRI_MIDPOINT.iter().enumerate() {
            let aq = a.eval(pts[qi]);
            let flux = [
                aq[0][0] * q[0] + aq[0][1] * q[1],
                aq[1][0] * q[0] + aq[1][1] * q[1],
            ];
            acc += w * area * (flux[0] * pv[0] + flux[1] * pv[1]);
        }
    }
    acc
}

/// integral over Sigma of alpha v with the assembly quadrature.
fn surface_alpha_integral(
    mesh: &TriMesh,
    alpha: &SurfaceResistivity,
    v: &FEFunction,
) -> Result<f64> {
    if !mesh.has_tag(EdgeTag::Sigma) {
        return Ok(0.0);
    }
    let center = mesh
        .cell_geometry
        .ok_or_else(|| Error::MeshMismatch("cell mesh carries no geometry".into()))?
        .hole_center;
    let mut acc = 0.0;
    for &[a, b] in mesh.edges(EdgeTag::Sigma)? {
        let pa = mesh.vertices[a];
        let pb = mesh.vertices[b];
        let len = crate::mesh::dist(pa, pb);
        let pts = edge_points(pa, pb);
        for (q, (t, w)) in EDGE_GAUSS2.iter().enumerate() {
            let val = (1.0 - t) * v.values()[a] + t * v.values()[b];
            acc += w * len * alpha.eval_at(pts[q], center) * val;
        }
    }
    Ok(acc)
}

const E: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

/// Both quadrature-consistent forms of the effective tensor.
pub fn compute_a_hom_forms(
    cells: &CellSolutionSet,
    a: &MatrixField,
) -> Result<([[f64; 2]; 2], [[f64; 2]; 2])> {
    for z in &cells.zeta {
        check_same_mesh(cells, z)?;
    }
    let mesh = cells.mesh();
    let mut definition = [[0.0; 2]; 2];
    let mut energy = [[0.0; 2]; 2];
    for j in 0..2 {
        for i in 0..2 {
            definition[i][j] =
                volume_flux_integral(mesh, a, E[j], Some(&cells.zeta[j]), E[i], None);
            energy[i][j] = volume_flux_integral(
                mesh,
                a,
                E[j],
                Some(&cells.zeta[j]),
                E[i],
                Some(&cells.zeta[i]),
            );
        }
    }
    Ok((definition, energy))
}

/// Effective tensor a_ij = integral (a_ij + sum_k a_ik d zeta_j / d y_k) dy
/// (the definition form).
pub fn compute_a_hom(cells: &CellSolutionSet, a: &MatrixField) -> Result<[[f64; 2]; 2]> {
    Ok(compute_a_hom_forms(cells, a)?.0)
}

/// The three algebraically equivalent forms of the convection vector.
#[derive(Debug, Clone, Copy)]
pub struct ConvectionForms {
    /// integral alpha zeta_i over Sigma - integral (A e_i) . grad gamma.
    pub surface: [f64; 2],
    /// Substituting gamma's equation tested with zeta_i.
    pub substituted: [f64; 2],
    /// integral grad(gamma)^T (A - A^T) grad(zeta_i); vanishes pointwise for
    /// symmetric A.
    pub antisymmetric: [f64; 2],
}

impl ConvectionForms {
    /// Largest pairwise deviation, relative to max(1, |B|_inf).
    pub fn max_relative_gap(&self) -> f64 {
        let mut scale = 1.0f64;
        for v in [self.surface, self.substituted, self.antisymmetric] {
            scale = scale.max(v[0].abs()).max(v[1].abs());
        }
        let mut gap = 0.0f64;
        for i in 0..2 {
            gap = gap.max((self.surface[i] - self.substituted[i]).abs());
            gap = gap.max((self.surface[i] - self.antisymmetric[i]).abs());
            gap = gap.max((self.substituted[i] - self.antisymmetric[i]).abs());
        }
        gap / scale
    }
}

pub fn compute_b_forms(
    cells: &CellSolutionSet,
    a: &MatrixField,
    alpha: &SurfaceResistivity,
) -> Result<ConvectionForms> {
    check_same_mesh(cells, &cells.gamma)?;
    let mesh = cells.mesh();
    let mut surface = [0.0; 2];
    let mut substituted = [0.0; 2];
    let mut antisymmetric = [0.0; 2];
    for i in 0..2 {
        let alpha_zeta = surface_alpha_integral(mesh, alpha, &cells.zeta[i])?;
        // integral (A e_i) . grad gamma.
        let aei_grad_gamma =
            volume_flux_integral(mesh, a, E[i], None, [0.0; 2], Some(&cells.gamma));
        surface[i] = alpha_zeta - aei_grad_gamma;

        // gamma's equation tested with zeta_i replaces the surface integral.
        let agg_zi = volume_flux_integral(
            mesh,
            a,
            [0.0; 2],
            Some(&cells.gamma),
            [0.0; 2],
            Some(&cells.zeta[i]),
        );
        substituted[i] = -agg_zi - aei_grad_gamma;

        // zeta_i's equation tested with gamma then removes A e_i as well.
        let azi_gg = volume_flux_integral(
            mesh,
            a,
            [0.0; 2],
            Some(&cells.zeta[i]),
            [0.0; 2],
            Some(&cells.gamma),
        );
        antisymmetric[i] = azi_gg - agg_zi;
    }
    Ok(ConvectionForms {
        surface,
        substituted,
        antisymmetric,
    })
}

/// Convection vector in the form stated by the limit theorem.
pub fn compute_b(
    cells: &CellSolutionSet,
    a: &MatrixField,
    alpha: &SurfaceResistivity,
) -> Result<[f64; 2]> {
    Ok(compute_b_forms(cells, a, alpha)?.surface)
}

/// Both forms of the zero-order coefficient; `energy` is the returned one.
#[derive(Debug, Clone, Copy)]
pub struct ZeroOrderForms {
    pub surface: f64,
    pub energy: f64,
    pub mu_tilde: f64,
}

pub fn compute_lambda(
    cells: &CellSolutionSet,
    a: &MatrixField,
    alpha: &SurfaceResistivity,
    mu: &ScalarVolumeField,
) -> Result<ZeroOrderForms> {
    check_same_mesh(cells, &cells.gamma)?;
    let mesh = cells.mesh();
    let mut mu_tilde = 0.0;
    for t in 0..mesh.num_triangles() {
        let p = mesh.triangle_points(t);
        let area = 0.5 * mesh.double_area(t);
        let pts = tri_points(&p);
        for (q, (_, w)) in TRI_MIDPOINT.iter().enumerate() {
            mu_tilde += w * area * mu.eval(pts[q]);
        }
    }
    let surface = surface_alpha_integral(mesh, alpha, &cells.gamma)? + mu_tilde;
    let energy = -volume_flux_integral(
        mesh,
        a,
        [0.0; 2],
        Some(&cells.gamma),
        [0.0; 2],
        Some(&cells.gamma),
    ) + mu_tilde;
    Ok(ZeroOrderForms {
        surface,
        energy,
        mu_tilde,
    })
}

/// Macro source F(x) = integral_{Y_s} f(x,y) dy + integral_Sigma g(x,y) dsigma:
/// integrates the y factor of every separable term, leaving an x-only field.
pub fn compute_f(f: &SourceField, g: &SourceField, cell: &TriMesh) -> Result<SourceField> {
    let mut terms = Vec::new();
    for term in &f.terms {
        let mut weight = 0.0;
        for t in 0..cell.num_triangles() {
            let p = cell.triangle_points(t);
            let area = 0.5 * cell.double_area(t);
            let pts = tri_points(&p);
            for (q, (_, w)) in TRI_MIDPOINT.iter().enumerate() {
                weight += w * area * term.y.eval(pts[q]);
            }
        }
        terms.push(SourceTerm {
            x: term.x.clone(),
            y: Factor::Const { value: weight },
        });
    }
    for term in &g.terms {
        let mut weight = 0.0;
        if cell.has_tag(EdgeTag::Sigma) {
            for &[a, b] in cell.edges(EdgeTag::Sigma)? {
                let pa = cell.vertices[a];
                let pb = cell.vertices[b];
                let len = crate::mesh::dist(pa, pb);
                let pts = edge_points(pa, pb);
                for (q, (_, w)) in EDGE_GAUSS2.iter().enumerate() {
                    weight += w * len * term.y.eval(pts[q]);
                }
            }
        }
        terms.push(SourceTerm {
            x: term.x.clone(),
            y: Factor::Const { value: weight },
        });
    }
    Ok(SourceField { terms })
}

/// Bundle the effective coefficients into a validated model.
pub fn build_model(cells: &CellSolutionSet, coeffs: &CoefficientSet) -> Result<HomogenizedModel> {
    let a_hom = compute_a_hom(cells, &coeffs.a)?;
    let b = compute_b(cells, &coeffs.a, &coeffs.alpha)?;
    let lambda = compute_lambda(cells, &coeffs.a, &coeffs.alpha, &coeffs.mu)?;
    let f_macro = compute_f(&coeffs.f, &coeffs.g, cells.mesh())?;
    let model = HomogenizedModel {
        a_hom,
        b,
        lambda: lambda.energy,
        mu_tilde: lambda.mu_tilde,
        f_macro,
        provenance: Provenance {
            cell_mesh_id: cells.mesh().id(),
            coefficient_hash: coeffs.content_hash(),
        },
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell_problems::{CellSolutionSet, CELL_SOLVE_TOL};
    use crate::coefficients::discrete_zero_mean_correction;
    use crate::mesh::{build_cell_mesh, CellGeometry};
    use std::sync::Arc;

    fn cell(r: f64, l: u32) -> Arc<TriMesh> {
        Arc::new(
            build_cell_mesh(&CellGeometry {
                hole_center: [0.5, 0.5],
                hole_radius: r,
                refinement: l,
            })
            .unwrap(),
        )
    }

    fn corrected(modes: Vec<[f64; 2]>, mesh: &TriMesh) -> SurfaceResistivity {
        discrete_zero_mean_correction(&SurfaceResistivity::from_modes(modes).unwrap(), mesh)
            .unwrap()
    }

    fn nonsym_a() -> MatrixField {
        MatrixField::Trig {
            c: [[1.0, 0.5], [0.0, 1.0]],
            d: [[0.0, 0.3], [0.0, 0.0]],
            wave: [1, 0],
        }
    }

    #[test]
    fn identity_no_hole_collapses() {
        let mesh = cell(0.0, 4);
        let coeffs = CoefficientSet {
            a: MatrixField::identity(),
            mu: ScalarVolumeField::one(),
            alpha: SurfaceResistivity::zero(),
            f: SourceField::constant(1.0),
            g: SourceField::zero(),
        };
        let cells =
            CellSolutionSet::solve(&mesh, &coeffs.a, &coeffs.alpha, CELL_SOLVE_TOL).unwrap();
        let model = build_model(&cells, &coeffs).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((model.a_hom[i][j] - want).abs() <= 1e-10);
            }
        }
        assert!(model.b[0].abs() <= 1e-10 && model.b[1].abs() <= 1e-10);
        assert!((model.lambda - 1.0).abs() <= 1e-10);
        assert!((model.mu_tilde - 1.0).abs() <= 1e-10);
        // F is the constant |Y_s| = 1.
        assert!((model.f_macro.eval([0.3, 0.6], [0.0, 0.0]) - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn constant_diagonal_no_hole() {
        let mesh = cell(0.0, 4);
        let a = MatrixField::Constant {
            c: [[2.0, 0.0], [0.0, 3.0]],
        };
        let cells =
            CellSolutionSet::solve(&mesh, &a, &SurfaceResistivity::zero(), CELL_SOLVE_TOL)
                .unwrap();
        let a_hom = compute_a_hom(&cells, &a).unwrap();
        let want = [[2.0, 0.0], [0.0, 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((a_hom[i][j] - want[i][j]).abs() <= 1e-10, "{a_hom:?}");
            }
        }
    }

    #[test]
    fn forms_agree_for_nonsymmetric_configuration() {
        let mesh = cell(0.25, 4);
        let a = nonsym_a();
        let alpha = corrected(vec![[1.0, 0.0], [0.0, 0.5]], &mesh);
        let cells = CellSolutionSet::solve(&mesh, &a, &alpha, CELL_SOLVE_TOL).unwrap();

        let (definition, energy) = compute_a_hom_forms(&cells, &a).unwrap();
        let scale = definition
            .iter()
            .flatten()
            .fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (definition[i][j] - energy[i][j]).abs() / scale <= 1e-9,
                    "def {definition:?} energy {energy:?}"
                );
            }
        }

        let b = compute_b_forms(&cells, &a, &alpha).unwrap();
        assert!(
            b.max_relative_gap() <= 1e-9,
            "B gap {}",
            b.max_relative_gap()
        );
        // The strange term is genuinely nonzero here.
        assert!(b.surface[0].abs() + b.surface[1].abs() > 1e-6, "{b:?}");

        let lam = compute_lambda(&cells, &a, &alpha, &ScalarVolumeField::one()).unwrap();
        let gap = (lam.surface - lam.energy).abs() / lam.energy.abs().max(1.0);
        assert!(gap <= 1e-9, "lambda forms {lam:?}");
        assert!(lam.energy <= lam.mu_tilde);
    }

    #[test]
    fn symmetric_matrix_kills_convection() {
        let mesh = cell(0.25, 4);
        let alpha = corrected(vec![[1.0, 0.0], [0.0, 0.5]], &mesh);
        let cases = [
            MatrixField::Constant {
                c: [[2.0, 0.0], [0.0, 3.0]],
            },
            MatrixField::Constant {
                c: [[2.0, 0.5], [0.5, 1.0]],
            },
            MatrixField::Trig {
                c: [[1.0, 0.0], [0.0, 1.0]],
                d: [[0.3, 0.0], [0.0, 0.3]],
                wave: [1, 1],
            },
        ];
        for a in cases {
            let cells = CellSolutionSet::solve(&mesh, &a, &alpha, CELL_SOLVE_TOL).unwrap();
            let b = compute_b(&cells, &a, &alpha).unwrap();
            let (_, big) = crate::coefficients::validate_ellipticity(&a, 64).unwrap();
            let bound = 1e-8 * big.max(1.0);
            assert!(
                b[0].abs() <= bound && b[1].abs() <= bound,
                "B = {b:?} for {a:?}"
            );
        }
    }

    #[test]
    fn lambda_without_resistivity_is_cell_volume() {
        let mesh = cell(0.25, 4);
        let a = MatrixField::identity();
        let cells =
            CellSolutionSet::solve(&mesh, &a, &SurfaceResistivity::zero(), CELL_SOLVE_TOL)
                .unwrap();
        let lam = compute_lambda(
            &cells,
            &a,
            &SurfaceResistivity::zero(),
            &ScalarVolumeField::one(),
        )
        .unwrap();
        let want = 1.0 - std::f64::consts::PI / 16.0;
        assert!((lam.energy - want).abs() / want < 0.02);
        assert_eq!(lam.energy, lam.surface);

        let no_hole = cell(0.0, 4);
        let cells = CellSolutionSet::solve(
            &no_hole,
            &a,
            &SurfaceResistivity::zero(),
            CELL_SOLVE_TOL,
        )
        .unwrap();
        let lam = compute_lambda(
            &cells,
            &a,
            &SurfaceResistivity::zero(),
            &ScalarVolumeField::one(),
        )
        .unwrap();
        assert!((lam.energy - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn lambda_strictly_below_mu_tilde_with_resistivity() {
        let mesh = cell(0.25, 4);
        let a = MatrixField::identity();
        let alpha = corrected(vec![[1.0, 0.0]], &mesh);
        let cells = CellSolutionSet::solve(&mesh, &a, &alpha, CELL_SOLVE_TOL).unwrap();
        let lam = compute_lambda(&cells, &a, &alpha, &ScalarVolumeField::one()).unwrap();
        assert!(lam.energy < lam.mu_tilde, "{lam:?}");
    }

    #[test]
    fn macro_source_trivial_cases() {
        let mesh = cell(0.25, 4);
        let x = [0.3, 0.8];
        // f = 1, g = 0: F = |Y_s|.
        let f = compute_f(&SourceField::constant(1.0), &SourceField::zero(), &mesh).unwrap();
        let want = 1.0 - std::f64::consts::PI / 16.0;
        assert!((f.eval(x, [0.0, 0.0]) - want).abs() / want < 0.02);

        // f = 0, g = 1: F = |Sigma|.
        let g = compute_f(&SourceField::zero(), &SourceField::constant(1.0), &mesh).unwrap();
        let want = std::f64::consts::PI / 2.0;
        assert!((g.eval(x, [0.0, 0.0]) - want).abs() / want < 0.02);

        // f(x,y) = sin(2 pi y1) integrates to ~0 by symmetry about the center.
        let odd = SourceField {
            terms: vec![SourceTerm {
                x: Factor::Const { value: 1.0 },
                y: Factor::Sin { axis: 1, freq: 1 },
            }],
        };
        let f = compute_f(&odd, &SourceField::zero(), &mesh).unwrap();
        assert!(f.eval(x, [0.0, 0.0]).abs() < 1e-3);
    }

    #[test]
    fn voigt_bound_for_symmetric_matrices() {
        let mesh = cell(0.25, 4);
        let alpha = corrected(vec![[1.0, 0.0]], &mesh);
        let cases = [
            MatrixField::identity(),
            MatrixField::Constant {
                c: [[2.0, 0.5], [0.5, 1.0]],
            },
            MatrixField::Trig {
                c: [[1.5, 0.2], [0.2, 1.0]],
                d: [[0.3, 0.1], [0.1, 0.2]],
                wave: [1, -1],
            },
        ];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let dirs = [[1.0, 0.0], [0.0, 1.0], [s, s]];
        for a in cases {
            let cells = CellSolutionSet::solve(&mesh, &a, &alpha, CELL_SOLVE_TOL).unwrap();
            let a_hom = compute_a_hom(&cells, &a).unwrap();
            // A_hom symmetric for symmetric A.
            assert!((a_hom[0][1] - a_hom[1][0]).abs() <= 1e-9);
            for xi in dirs {
                let lhs = xi[0] * (a_hom[0][0] * xi[0] + a_hom[0][1] * xi[1])
                    + xi[1] * (a_hom[1][0] * xi[0] + a_hom[1][1] * xi[1]);
                // Voigt: trial zeta = 0 in the energy form.
                let rhs = volume_flux_integral(&mesh, &a, xi, None, xi, None);
                assert!(lhs <= rhs + 1e-9, "xi {xi:?}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn a_hom_upper_bound_identity_hole() {
        let mesh = cell(0.25, 4);
        let a = MatrixField::identity();
        let cells =
            CellSolutionSet::solve(&mesh, &a, &SurfaceResistivity::zero(), CELL_SOLVE_TOL)
                .unwrap();
        let a_hom = compute_a_hom(&cells, &a).unwrap();
        let bound = 1.0 - std::f64::consts::PI / 16.0 + 0.02;
        assert!(a_hom[0][0] > 0.0 && a_hom[0][0] <= bound, "{a_hom:?}");
        assert!(
            (a_hom[0][0] - a_hom[1][1]).abs() <= 1e-9,
            "isotropy: {a_hom:?}"
        );
        assert!(a_hom[0][1].abs() <= 1e-9);
    }

    #[test]
    fn model_json_shape_and_validation() {
        let mesh = cell(0.25, 4);
        let coeffs = CoefficientSet {
            a: nonsym_a(),
            mu: ScalarVolumeField::one(),
            alpha: corrected(vec![[1.0, 0.0], [0.0, 0.5]], &mesh),
            f: SourceField::constant(1.0),
            g: SourceField::zero(),
        };
        let cells =
            CellSolutionSet::solve(&mesh, &coeffs.a, &coeffs.alpha, CELL_SOLVE_TOL).unwrap();
        let model = build_model(&cells, &coeffs).unwrap();
        let json = serde_json::to_value(&model).unwrap();
        for key in ["A_hom", "B", "lambda", "mu_tilde", "F", "provenance"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let back: HomogenizedModel = serde_json::from_value(json).unwrap();
        assert_eq!(back.provenance, model.provenance);
        back.validate().unwrap();
    }
}
