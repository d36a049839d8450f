//! P1 finite-element kernel: form assembly, constraint handling, solves
//! and norms.
//!
//! All volume integrals use the 3-point midpoint rule, all surface integrals
//! the 2-point Gauss rule. Assembly pushes element contributions in a fixed
//! order, so assembled matrices are bitwise reproducible.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{EdgeTag, TriMesh};
use crate::quadrature::{edge_points, tri_points, EDGE_GAUSS2, TRI_MIDPOINT};
use crate::sparse::{solve_bicgstab, CsrMatrix};

/// Nodal P1 function on a shared mesh.
#[derive(Debug, Clone)]
pub struct FEFunction {
    mesh: Arc<TriMesh>,
    values: Vec<f64>,
}

impl FEFunction {
    pub fn new(mesh: Arc<TriMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::MeshMismatch(format!(
                "{} values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        Ok(FEFunction { mesh, values })
    }

    pub fn zeros(mesh: Arc<TriMesh>) -> Self {
        let n = mesh.num_vertices();
        FEFunction {
            mesh,
            values: vec![0.0; n],
        }
    }

    pub fn constant(mesh: Arc<TriMesh>, v: f64) -> Self {
        let n = mesh.num_vertices();
        FEFunction {
            mesh,
            values: vec![v; n],
        }
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Value from barycentric coordinates inside triangle `t`.
    pub fn value_in(&self, t: usize, bary: [f64; 3]) -> f64 {
        let tri = self.mesh.triangles[t];
        bary[0] * self.values[tri[0]] + bary[1] * self.values[tri[1]] + bary[2] * self.values[tri[2]]
    }

    /// Piecewise-constant gradient on triangle `t`.
    pub fn gradient_on(&self, t: usize) -> [f64; 2] {
        let (grads, _) = self.mesh.p1_gradients(t);
        let tri = self.mesh.triangles[t];
        let mut g = [0.0; 2];
        for k in 0..3 {
            for d in 0..2 {
                g[d] += self.values[tri[k]] * grads[k][d];
            }
        }
        g
    }

    /// Exact integral of the P1 interpolant over the mesh.
    pub fn integral(&self) -> f64 {
        let mut acc = 0.0;
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let area = 0.5 * self.mesh.double_area(t);
            acc += area * (self.values[tri[0]] + self.values[tri[1]] + self.values[tri[2]]) / 3.0;
        }
        acc
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }
}

/// One bilinear-form term of the problem.
pub enum FormDescriptor<'a> {
    /// integral (A grad u) . grad v with a possibly nonsymmetric matrix.
    Diffusion(&'a dyn Fn([f64; 2]) -> [[f64; 2]; 2]),
    /// integral (b . grad u) v with a constant vector.
    Convection([f64; 2]),
    /// integral w u v.
    VolumeReaction(&'a dyn Fn([f64; 2]) -> f64),
    /// integral alpha u v over a tagged edge group.
    SurfaceReaction {
        alpha: &'a dyn Fn([f64; 2]) -> f64,
        tag: EdgeTag,
    },
}

/// Element stiffness for the (possibly nonsymmetric) diffusion term,
/// K_ij = integral (A grad phi_j) . grad phi_i.
pub fn element_stiffness(
    p: &[[f64; 2]; 3],
    a: &dyn Fn([f64; 2]) -> [[f64; 2]; 2],
) -> [[f64; 3]; 3] {
    let (grads, area) = p1_gradients(p);
    let pts = tri_points(p);
    let mut k = [[0.0; 3]; 3];
    for (q, (_, w)) in TRI_MIDPOINT.iter().enumerate() {
        let aq = a(pts[q]);
        for j in 0..3 {
            let agj = [
                aq[0][0] * grads[j][0] + aq[0][1] * grads[j][1],
                aq[1][0] * grads[j][0] + aq[1][1] * grads[j][1],
            ];
            for i in 0..3 {
                k[i][j] += w * area * (agj[0] * grads[i][0] + agj[1] * grads[i][1]);
            }
        }
    }
    k
}

/// Element mass for the volume reaction term, exact for constant weights.
pub fn element_mass(p: &[[f64; 2]; 3], w_fn: &dyn Fn([f64; 2]) -> f64) -> [[f64; 3]; 3] {
    let (_, area) = p1_gradients(p);
    let pts = tri_points(p);
    let mut m = [[0.0; 3]; 3];
    for (q, (bary, w)) in TRI_MIDPOINT.iter().enumerate() {
        let wq = w * area * w_fn(pts[q]);
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += wq * bary[i] * bary[j];
            }
        }
    }
    m
}

/// Element convection, C_ij = integral (b . grad phi_j) phi_i.
pub fn element_convection(p: &[[f64; 2]; 3], b: [f64; 2]) -> [[f64; 3]; 3] {
    let (grads, area) = p1_gradients(p);
    let mut c = [[0.0; 3]; 3];
    for (_, (bary, w)) in TRI_MIDPOINT.iter().enumerate() {
        for j in 0..3 {
            let bj = b[0] * grads[j][0] + b[1] * grads[j][1];
            for i in 0..3 {
                c[i][j] += w * area * bj * bary[i];
            }
        }
    }
    c
}

/// Edge mass for the surface reaction, E_ij = integral alpha phi_i phi_j.
pub fn edge_mass(a: [f64; 2], b: [f64; 2], alpha: &dyn Fn([f64; 2]) -> f64) -> [[f64; 2]; 2] {
    let len = crate::mesh::dist(a, b);
    let pts = edge_points(a, b);
    let mut e = [[0.0; 2]; 2];
    for (q, (t, w)) in EDGE_GAUSS2.iter().enumerate() {
        let aq = w * len * alpha(pts[q]);
        let phi = [1.0 - t, *t];
        for i in 0..2 {
            for j in 0..2 {
                e[i][j] += aq * phi[i] * phi[j];
            }
        }
    }
    e
}

fn p1_gradients(p: &[[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let d = crate::mesh::double_area(p);
    (
        [
            [(p[1][1] - p[2][1]) / d, (p[2][0] - p[1][0]) / d],
            [(p[2][1] - p[0][1]) / d, (p[0][0] - p[2][0]) / d],
            [(p[0][1] - p[1][1]) / d, (p[1][0] - p[0][0]) / d],
        ],
        0.5 * d,
    )
}

/// Assemble one bilinear term into triplets over the full node set.
pub fn assemble_bilinear(
    mesh: &TriMesh,
    term: &FormDescriptor<'_>,
) -> Result<Vec<(usize, usize, f64)>> {
    let mut triplets = Vec::new();
    match term {
        FormDescriptor::Diffusion(a) => {
            for (t, tri) in mesh.triangles.iter().enumerate() {
                let k = element_stiffness(&mesh.triangle_points(t), *a);
                scatter(&mut triplets, tri, &k);
            }
        }
        FormDescriptor::VolumeReaction(w) => {
            for (t, tri) in mesh.triangles.iter().enumerate() {
                let m = element_mass(&mesh.triangle_points(t), *w);
                scatter(&mut triplets, tri, &m);
            }
        }
        FormDescriptor::Convection(b) => {
            for (t, tri) in mesh.triangles.iter().enumerate() {
                let c = element_convection(&mesh.triangle_points(t), *b);
                scatter(&mut triplets, tri, &c);
            }
        }
        FormDescriptor::SurfaceReaction { alpha, tag } => {
            let edges = mesh.edges(*tag)?;
            for &[a, b] in edges {
                let e = edge_mass(mesh.vertices[a], mesh.vertices[b], *alpha);
                for (i, &gi) in [a, b].iter().enumerate() {
                    for (j, &gj) in [a, b].iter().enumerate() {
                        triplets.push((gi, gj, e[i][j]));
                    }
                }
            }
        }
    }
    Ok(triplets)
}

fn scatter(triplets: &mut Vec<(usize, usize, f64)>, tri: &[usize; 3], k: &[[f64; 3]; 3]) {
    for i in 0..3 {
        for j in 0..3 {
            triplets.push((tri[i], tri[j], k[i][j]));
        }
    }
}

/// Nodal load vector of a volume density: b_i = integral f phi_i.
pub fn assemble_load_volume(mesh: &TriMesh, f: &dyn Fn([f64; 2]) -> f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.triangle_points(t);
        let (_, area) = p1_gradients(&p);
        let pts = tri_points(&p);
        for (q, (bary, w)) in TRI_MIDPOINT.iter().enumerate() {
            let fq = w * area * f(pts[q]);
            for i in 0..3 {
                load[tri[i]] += fq * bary[i];
            }
        }
    }
    load
}

/// Nodal load of a surface density over a tagged group: b_i = integral g phi_i.
pub fn assemble_load_surface(
    mesh: &TriMesh,
    tag: EdgeTag,
    g: &dyn Fn([f64; 2]) -> f64,
) -> Result<Vec<f64>> {
    let edges = mesh.edges(tag)?;
    let mut load = vec![0.0; mesh.num_vertices()];
    for &[a, b] in edges {
        let pa = mesh.vertices[a];
        let pb = mesh.vertices[b];
        let len = crate::mesh::dist(pa, pb);
        let pts = edge_points(pa, pb);
        for (q, (t, w)) in EDGE_GAUSS2.iter().enumerate() {
            let gq = w * len * g(pts[q]);
            load[a] += gq * (1.0 - t);
            load[b] += gq * t;
        }
    }
    Ok(load)
}

/// Flux load b_i = integral q . grad phi_i, used by the corrector problems.
pub fn assemble_flux_load(mesh: &TriMesh, q: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.triangle_points(t);
        let (grads, area) = p1_gradients(&p);
        let pts = tri_points(&p);
        for (qp, (_, w)) in TRI_MIDPOINT.iter().enumerate() {
            let qv = q(pts[qp]);
            for i in 0..3 {
                load[tri[i]] += w * area * (qv[0] * grads[i][0] + qv[1] * grads[i][1]);
            }
        }
    }
    load
}

/// Constraint specification applied to an assembled system.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSpec {
    /// Dirichlet groups with prescribed values (usually (Gamma, 0)).
    pub dirichlet: Vec<(EdgeTag, f64)>,
    /// Merge the mesh's periodic pairs (slave into master).
    pub periodic: bool,
    /// Append one Lagrange-multiplier row enforcing integral u = 0.
    pub zero_mean: bool,
}

impl ConstraintSpec {
    pub fn dirichlet_zero(tag: EdgeTag) -> Self {
        ConstraintSpec {
            dirichlet: vec![(tag, 0.0)],
            ..Default::default()
        }
    }

    pub fn periodic_zero_mean() -> Self {
        ConstraintSpec {
            periodic: true,
            zero_mean: true,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Dof {
    Reduced(usize),
    Fixed(f64),
}

struct Reduction {
    dof: Vec<Dof>,
    n_reduced: usize,
    /// Zero-mean weights on the full node set, when the constraint is on.
    weights: Option<Vec<f64>>,
}

/// Assembled bilinear system with right-hand side and constraint handling.
pub struct SparseSystem {
    mesh: Arc<TriMesh>,
    triplets: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
    reduction: Option<Reduction>,
    reduced_matrix: Option<CsrMatrix>,
    reduced_rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn new(mesh: Arc<TriMesh>) -> Self {
        let n = mesh.num_vertices();
        SparseSystem {
            mesh,
            triplets: Vec::new(),
            rhs: vec![0.0; n],
            reduction: None,
            reduced_matrix: None,
            reduced_rhs: Vec::new(),
        }
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn add_bilinear(&mut self, term: &FormDescriptor<'_>) -> Result<&mut Self> {
        let t = assemble_bilinear(&self.mesh, term)?;
        self.triplets.extend(t);
        self.invalidate();
        Ok(self)
    }

    pub fn add_rhs(&mut self, load: &[f64]) -> &mut Self {
        for (r, l) in self.rhs.iter_mut().zip(load) {
            *r += l;
        }
        self.invalidate();
        self
    }

    pub fn add_scaled_rhs(&mut self, load: &[f64], scale: f64) -> &mut Self {
        for (r, l) in self.rhs.iter_mut().zip(load) {
            *r += scale * l;
        }
        self.invalidate();
        self
    }

    fn invalidate(&mut self) {
        self.reduction = None;
        self.reduced_matrix = None;
        self.reduced_rhs.clear();
    }

    /// Full-size assembled matrix (before constraints), for inspection.
    pub fn full_matrix(&self) -> CsrMatrix {
        let n = self.mesh.num_vertices();
        CsrMatrix::from_triplets(n, n, &self.triplets)
    }

    /// Eliminate Dirichlet nodes, merge periodic slaves and optionally append
    /// the zero-mean Lagrange multiplier. Dirichlet columns move to the
    /// right-hand side, keeping the reduction consistent for nonzero values.
    pub fn apply_constraints(&mut self, spec: &ConstraintSpec) -> Result<&mut Self> {
        let n = self.mesh.num_vertices();

        // Union-find over periodic pairs.
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], v: usize) -> usize {
            let mut root = v;
            while parent[root] != root {
                root = parent[root];
            }
            let mut cur = v;
            while parent[cur] != root {
                let next = parent[cur];
                parent[cur] = root;
                cur = next;
            }
            root
        }
        let mut is_slave = vec![false; n];
        if spec.periodic {
            for &(master, slave) in &self.mesh.periodic_pairs {
                is_slave[slave] = true;
                let rm = find(&mut parent, master);
                let rs = find(&mut parent, slave);
                if rm != rs {
                    // Attach the higher root under the lower one so class
                    // representatives are deterministic.
                    let (lo, hi) = (rm.min(rs), rm.max(rs));
                    parent[hi] = lo;
                }
            }
        }

        // Dirichlet values per node.
        let mut fixed: Vec<Option<f64>> = vec![None; n];
        for (tag, value) in &spec.dirichlet {
            for &[a, b] in self.mesh.edges(*tag)? {
                for v in [a, b] {
                    if spec.periodic && is_slave[v] {
                        return Err(Error::ConflictingConstraints { node: v });
                    }
                    fixed[v] = Some(*value);
                }
            }
        }

        // Propagate Dirichlet values to class roots and check consistency.
        let mut root_fixed: Vec<Option<f64>> = vec![None; n];
        for v in 0..n {
            if let Some(val) = fixed[v] {
                let r = find(&mut parent, v);
                match root_fixed[r] {
                    Some(prev) if prev != val => {
                        return Err(Error::ConflictingConstraints { node: v })
                    }
                    _ => root_fixed[r] = Some(val),
                }
            }
        }

        // Reduced dof numbering in node order.
        let mut dof = vec![Dof::Fixed(0.0); n];
        let mut n_reduced = 0usize;
        for v in 0..n {
            let r = find(&mut parent, v);
            if r == v {
                dof[v] = match root_fixed[r] {
                    Some(val) => Dof::Fixed(val),
                    None => {
                        let d = Dof::Reduced(n_reduced);
                        n_reduced += 1;
                        d
                    }
                };
            }
        }
        for v in 0..n {
            let r = find(&mut parent, v);
            if r != v {
                dof[v] = dof[r];
            }
        }

        // Reduce matrix and right-hand side.
        let extra = usize::from(spec.zero_mean);
        let dim = n_reduced + extra;
        let mut reduced_rhs = vec![0.0; dim];
        let mut reduced: Vec<(usize, usize, f64)> = Vec::with_capacity(self.triplets.len());
        for &(r, c, v) in &self.triplets {
            match (dof[r], dof[c]) {
                (Dof::Reduced(i), Dof::Reduced(j)) => reduced.push((i, j, v)),
                (Dof::Reduced(i), Dof::Fixed(g)) => reduced_rhs[i] -= v * g,
                (Dof::Fixed(_), _) => {}
            }
        }
        for v in 0..n {
            if let Dof::Reduced(i) = dof[v] {
                reduced_rhs[i] += self.rhs[v];
            }
        }

        let weights = if spec.zero_mean {
            let w = assemble_load_volume(&self.mesh, &|_| 1.0);
            let border = n_reduced;
            let mut wr = vec![0.0; n_reduced];
            for v in 0..n {
                if let Dof::Reduced(i) = dof[v] {
                    wr[i] += w[v];
                }
            }
            for (i, wi) in wr.iter().enumerate() {
                reduced.push((i, border, *wi));
                reduced.push((border, i, *wi));
            }
            reduced.push((border, border, 0.0));
            Some(w)
        } else {
            None
        };

        self.reduced_matrix = Some(CsrMatrix::from_triplets(dim, dim, &reduced));
        self.reduced_rhs = reduced_rhs;
        self.reduction = Some(Reduction {
            dof,
            n_reduced,
            weights,
        });
        Ok(self)
    }

    /// Dimension of the constrained system (including the multiplier row).
    pub fn reduced_dim(&self) -> Option<usize> {
        self.reduced_matrix.as_ref().map(|m| m.n_rows())
    }

    /// Solve to a relative residual and expand back to nodal values.
    /// Dirichlet nodes carry their prescribed values exactly; periodic
    /// slaves copy their masters exactly.
    pub fn solve(&mut self, tol: f64) -> Result<FEFunction> {
        if self.reduction.is_none() {
            self.apply_constraints(&ConstraintSpec::default())?;
        }
        let reduction = self.reduction.as_ref().unwrap();
        let matrix = self.reduced_matrix.as_ref().unwrap();
        let x = solve_bicgstab(matrix, &self.reduced_rhs, tol)?;

        let n = self.mesh.num_vertices();
        let mut values = vec![0.0; n];
        for v in 0..n {
            values[v] = match reduction.dof[v] {
                Dof::Reduced(i) => x[i],
                Dof::Fixed(g) => g,
            };
        }
        let mut f = FEFunction::new(self.mesh.clone(), values)?;
        if let Some(w) = &reduction.weights {
            // The multiplier enforces the mean to solver precision; shift the
            // tiny residual away so the quotient representative is exact.
            let total: f64 = w.iter().sum();
            let mean: f64 = w.iter().zip(f.values()).map(|(wi, ui)| wi * ui).sum();
            let shift = mean / total;
            f.values_mut().iter_mut().for_each(|v| *v -= shift);
        }
        Ok(f)
    }

    /// Residual of the constrained system at a given nodal function,
    /// measured against the reduced equations (Galerkin consistency).
    pub fn reduced_residual(&self, f: &FEFunction) -> Option<f64> {
        let reduction = self.reduction.as_ref()?;
        let matrix = self.reduced_matrix.as_ref()?;
        let mut x = vec![0.0; matrix.n_cols()];
        for v in 0..self.mesh.num_vertices() {
            if let Dof::Reduced(i) = reduction.dof[v] {
                x[i] = f.values()[v];
            }
        }
        Some(matrix.residual_norm(&x, &self.reduced_rhs))
    }

    pub fn n_reduced_nodes(&self) -> Option<usize> {
        self.reduction.as_ref().map(|r| r.n_reduced)
    }
}

/// Norm kinds of the a priori quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2Volume,
    H1Semi,
    L2Surface(EdgeTag),
}

/// Quadrature-consistent norms of a nodal function.
pub fn norm(f: &FEFunction, kind: NormKind) -> Result<f64> {
    let mesh = f.mesh();
    let acc = match kind {
        NormKind::L2Volume => {
            let mut acc = 0.0;
            for (t, tri) in mesh.triangles.iter().enumerate() {
                let area = 0.5 * mesh.double_area(t);
                for (bary, w) in TRI_MIDPOINT.iter() {
                    let u = bary[0] * f.values[tri[0]]
                        + bary[1] * f.values[tri[1]]
                        + bary[2] * f.values[tri[2]];
                    acc += w * area * u * u;
                }
            }
            acc
        }
        NormKind::H1Semi => {
            let mut acc = 0.0;
            for t in 0..mesh.num_triangles() {
                let g = f.gradient_on(t);
                let area = 0.5 * mesh.double_area(t);
                acc += area * (g[0] * g[0] + g[1] * g[1]);
            }
            acc
        }
        NormKind::L2Surface(tag) => {
            let mut acc = 0.0;
            for &[a, b] in mesh.edges(tag)? {
                let len = crate::mesh::dist(mesh.vertices[a], mesh.vertices[b]);
                for (t, w) in EDGE_GAUSS2.iter() {
                    let u = (1.0 - t) * f.values[a] + t * f.values[b];
                    acc += w * len * u * u;
                }
            }
            acc
        }
    };
    Ok(acc.sqrt())
}

/// L2 scalar product of two nodal functions over the volume.
pub fn l2_volume_inner(f: &FEFunction, g: &FEFunction) -> f64 {
    let mesh = f.mesh();
    let mut acc = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = 0.5 * mesh.double_area(t);
        for (bary, w) in TRI_MIDPOINT.iter() {
            let u = bary[0] * f.values[tri[0]]
                + bary[1] * f.values[tri[1]]
                + bary[2] * f.values[tri[2]];
            let v = bary[0] * g.values[tri[0]]
                + bary[1] * g.values[tri[1]]
                + bary[2] * g.values[tri[2]];
            acc += w * area * u * v;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cell_mesh, tile_perforated_mesh, CellGeometry};

    fn unit_right_triangle() -> [[f64; 2]; 3] {
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    }

    #[test]
    fn element_stiffness_identity_matches_hand_computation() {
        let k = element_stiffness(&unit_right_triangle(), &|_| [[1.0, 0.0], [0.0, 1.0]]);
        let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - want[i][j]).abs() < 1e-14, "K = {k:?}");
            }
        }
    }

    #[test]
    fn element_mass_matches_exact_p1_mass() {
        let m = element_mass(&unit_right_triangle(), &|_| 1.0);
        let area = 0.5;
        for i in 0..3 {
            for j in 0..3 {
                let want = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((m[i][j] - want).abs() < 1e-15, "M = {m:?}");
            }
        }
    }

    #[test]
    fn edge_mass_matches_1d_mass() {
        let len = 0.73;
        let e = edge_mass([0.1, 0.2], [0.1 + len, 0.2], &|_| 1.0);
        for i in 0..2 {
            for j in 0..2 {
                let want = len / 6.0 * if i == j { 2.0 } else { 1.0 };
                assert!((e[i][j] - want).abs() < 1e-15, "E = {e:?}");
            }
        }
    }

    fn no_hole_cell(l: u32) -> TriMesh {
        build_cell_mesh(&CellGeometry {
            hole_center: [0.5, 0.5],
            hole_radius: 0.0,
            refinement: l,
        })
        .unwrap()
    }

    #[test]
    fn volume_load_of_one_sums_to_area() {
        let mesh = no_hole_cell(3);
        let load = assemble_load_volume(&mesh, &|_| 1.0);
        let sum: f64 = load.iter().sum();
        assert!((sum - 1.0).abs() < 1e-13);

        let zero = assemble_load_volume(&mesh, &|_| 0.0);
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn surface_load_of_one_sums_to_sigma_length() {
        let mesh = build_cell_mesh(&CellGeometry::default()).unwrap();
        let load = assemble_load_surface(&mesh, EdgeTag::Sigma, &|_| 1.0).unwrap();
        let sum: f64 = load.iter().sum();
        let exact = std::f64::consts::PI / 2.0;
        assert!((sum - exact).abs() / exact < 0.02, "sum = {sum}");
    }

    #[test]
    fn missing_tag_reported() {
        let mesh = no_hole_cell(2);
        assert!(matches!(
            assemble_load_surface(&mesh, EdgeTag::Sigma, &|_| 1.0),
            Err(Error::MissingTag(EdgeTag::Sigma))
        ));
    }

    #[test]
    fn diffusion_row_sums_vanish() {
        let mesh = build_cell_mesh(&CellGeometry::default()).unwrap();
        let triplets = assemble_bilinear(&mesh, &FormDescriptor::Diffusion(&|_| {
            [[2.0, 0.3], [0.1, 1.5]]
        }))
        .unwrap();
        let n = mesh.num_vertices();
        let mut row_sums = vec![0.0; n];
        for (r, _, v) in triplets {
            row_sums[r] += v;
        }
        let worst = row_sums.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-12, "worst row sum {worst}");
    }

    #[test]
    fn symmetric_coefficients_give_symmetric_matrix() {
        let mesh = build_cell_mesh(&CellGeometry::default()).unwrap();
        let a = crate::coefficients::MatrixField::Trig {
            c: [[2.0, 0.4], [0.4, 1.0]],
            d: [[0.1, 0.0], [0.0, 0.2]],
            wave: [1, 1],
        };
        let triplets =
            assemble_bilinear(&mesh, &FormDescriptor::Diffusion(&|y| a.eval(y))).unwrap();
        let k = CsrMatrix::from_triplets(mesh.num_vertices(), mesh.num_vertices(), &triplets);
        assert!(k.max_asymmetry() <= 1e-12 * k.max_abs());
    }

    #[test]
    fn assembly_is_bitwise_deterministic() {
        let mesh = build_cell_mesh(&CellGeometry::default()).unwrap();
        let term = |y: [f64; 2]| [[1.0 + 0.3 * y[0], 0.2], [0.0, 1.0]];
        let t1 = assemble_bilinear(&mesh, &FormDescriptor::Diffusion(&term)).unwrap();
        let t2 = assemble_bilinear(&mesh, &FormDescriptor::Diffusion(&term)).unwrap();
        assert_eq!(t1.len(), t2.len());
        for (a, b) in t1.iter().zip(&t2) {
            assert_eq!(a.0, b.0);
            assert_eq!(a.1, b.1);
            assert_eq!(a.2.to_bits(), b.2.to_bits());
        }
    }

    #[test]
    fn constraint_dimensions() {
        // Dirichlet on GAMMA of the N=1 no-hole mesh leaves interior nodes.
        let cell = no_hole_cell(3);
        let tiled = tile_perforated_mesh(&cell, 1).unwrap();
        let mesh = Arc::new(tiled);
        let mut sys = SparseSystem::new(mesh.clone());
        sys.add_bilinear(&FormDescriptor::Diffusion(&|_| [[1.0, 0.0], [0.0, 1.0]]))
            .unwrap();
        sys.apply_constraints(&ConstraintSpec::dirichlet_zero(EdgeTag::Gamma))
            .unwrap();
        assert_eq!(sys.reduced_dim().unwrap(), 7 * 7);

        // Periodic merge eliminates one dof per distinct slave node.
        let mesh = Arc::new(no_hole_cell(3));
        let mut sys = SparseSystem::new(mesh.clone());
        sys.add_bilinear(&FormDescriptor::Diffusion(&|_| [[1.0, 0.0], [0.0, 1.0]]))
            .unwrap();
        sys.apply_constraints(&ConstraintSpec {
            periodic: true,
            ..Default::default()
        })
        .unwrap();
        let slaves: std::collections::BTreeSet<usize> =
            mesh.periodic_pairs.iter().map(|&(_, s)| s).collect();
        assert_eq!(sys.reduced_dim().unwrap(), 81 - slaves.len());
        assert_eq!(sys.reduced_dim().unwrap(), 64);

        // Zero mean adds exactly one row.
        sys.apply_constraints(&ConstraintSpec::periodic_zero_mean())
            .unwrap();
        assert_eq!(sys.reduced_dim().unwrap(), 65);
    }

    #[test]
    fn dirichlet_laplace_zero_load_gives_zero() {
        let cell = no_hole_cell(3);
        let mesh = Arc::new(tile_perforated_mesh(&cell, 1).unwrap());
        let mut sys = SparseSystem::new(mesh);
        sys.add_bilinear(&FormDescriptor::Diffusion(&|_| [[1.0, 0.0], [0.0, 1.0]]))
            .unwrap();
        sys.apply_constraints(&ConstraintSpec::dirichlet_zero(EdgeTag::Gamma))
            .unwrap();
        let u = sys.solve(1e-12).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        // -Laplace u = f with u = x1(1-x1)x2(1-x2) and Dirichlet 0.
        let exact = |p: [f64; 2]| p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]);
        let f = |p: [f64; 2]| 2.0 * (p[1] * (1.0 - p[1]) + p[0] * (1.0 - p[0]));
        let mut errors = Vec::new();
        for l in [3u32, 4, 5] {
            let mesh = Arc::new(tile_perforated_mesh(&no_hole_cell(l), 1).unwrap());
            let mut sys = SparseSystem::new(mesh.clone());
            sys.add_bilinear(&FormDescriptor::Diffusion(&|_| [[1.0, 0.0], [0.0, 1.0]]))
                .unwrap();
            let load = assemble_load_volume(&mesh, &f);
            sys.add_rhs(&load);
            sys.apply_constraints(&ConstraintSpec::dirichlet_zero(EdgeTag::Gamma))
                .unwrap();
            let u = sys.solve(1e-12).unwrap();
            let diff_values: Vec<f64> = mesh
                .vertices
                .iter()
                .zip(u.values())
                .map(|(p, v)| v - exact(*p))
                .collect();
            let diff = FEFunction::new(mesh.clone(), diff_values).unwrap();
            errors.push(norm(&diff, NormKind::L2Volume).unwrap());
        }
        for w in errors.windows(2) {
            let rate = w[0] / w[1];
            assert!((3.5..4.5).contains(&rate), "errors {errors:?}");
        }
    }

    #[test]
    fn periodic_solution_copies_slaves_exactly() {
        let mesh = Arc::new(build_cell_mesh(&CellGeometry::default()).unwrap());
        let mut sys = SparseSystem::new(mesh.clone());
        sys.add_bilinear(&FormDescriptor::Diffusion(&|_| [[1.0, 0.0], [0.0, 1.0]]))
            .unwrap();
        // Corrector-type load.
        let load = assemble_flux_load(&mesh, &|_| [-1.0, 0.0]);
        sys.add_rhs(&load);
        sys.apply_constraints(&ConstraintSpec::periodic_zero_mean())
            .unwrap();
        let u = sys.solve(1e-12).unwrap();
        for &(m, s) in &mesh.periodic_pairs {
            assert_eq!(u.values()[m].to_bits(), u.values()[s].to_bits());
        }
        // Zero mean representative.
        assert!(u.integral().abs() < 1e-12);
    }

    #[test]
    fn norms_of_constants() {
        let mesh = Arc::new(no_hole_cell(3));
        let one = FEFunction::constant(mesh.clone(), 1.0);
        assert!((norm(&one, NormKind::L2Volume).unwrap() - 1.0).abs() < 1e-13);
        assert_eq!(norm(&one, NormKind::H1Semi).unwrap(), 0.0);

        let holed = Arc::new(build_cell_mesh(&CellGeometry::default()).unwrap());
        let one = FEFunction::constant(holed, 1.0);
        let s = norm(&one, NormKind::L2Surface(EdgeTag::Sigma)).unwrap();
        let exact = (std::f64::consts::PI / 2.0).sqrt();
        assert!((s - exact).abs() / exact < 0.02, "sigma norm {s}");
    }

    #[test]
    fn mass_matrix_is_positive_semidefinite() {
        use rand::{Rng, SeedableRng};
        let mesh = build_cell_mesh(&CellGeometry::default()).unwrap();
        let triplets =
            assemble_bilinear(&mesh, &FormDescriptor::VolumeReaction(&|p| 1.0 + 0.5 * p[0]))
                .unwrap();
        let m = CsrMatrix::from_triplets(mesh.num_vertices(), mesh.num_vertices(), &triplets);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = mesh.num_vertices();
        for _ in 0..20 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut mx = vec![0.0; n];
            m.matvec(&x, &mut mx);
            let q: f64 = x.iter().zip(&mx).map(|(a, b)| a * b).sum();
            assert!(q >= -1e-12, "quadratic form {q}");
        }
    }
}
