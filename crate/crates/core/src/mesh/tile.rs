//! Tiling of the cell mesh into the perforated macro domain Omega_eps.

use std::collections::BTreeMap;
use std::collections::HashMap;

use super::{EdgeTag, TileInfo, TriMesh};
use crate::error::{Error, Result};

/// Stitch N x N scaled copies of the cell mesh into a conforming mesh of
/// Omega_eps with eps = 1/N. Duplicate face nodes are merged by exact
/// coordinate key: every tile computes the shared coordinate with the same
/// floating-point expression, so dyadic face coordinates match bit for bit.
/// GAMMA tags the outer boundary, SIGMA all hole boundaries; the tiled mesh
/// carries no periodic pairs (the fine problem is Dirichlet on GAMMA).
pub fn tile_perforated_mesh(cell: &TriMesh, n: usize) -> Result<TriMesh> {
    if n == 0 {
        return Err(Error::InvalidGeometry("tile count must be >= 1".into()));
    }
    let nf = n as f64;
    let face_tags = [
        EdgeTag::CellFaceLeft,
        EdgeTag::CellFaceRight,
        EdgeTag::CellFaceBottom,
        EdgeTag::CellFaceTop,
    ];

    // Face nodes are merge candidates; everything else is tile-private.
    let mut is_face = vec![false; cell.num_vertices()];
    for tag in face_tags {
        if let Ok(edges) = cell.edges(tag) {
            for &[a, b] in edges {
                is_face[a] = true;
                is_face[b] = true;
            }
        }
    }

    let mut vertices: Vec<[f64; 2]> = Vec::new();
    let mut by_key: HashMap<(u64, u64), usize> = HashMap::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut source_triangle: Vec<usize> = Vec::new();
    let mut sigma: Vec<[usize; 2]> = Vec::new();
    let mut gamma: Vec<[usize; 2]> = Vec::new();

    for ty in 0..n {
        for tx in 0..n {
            let mut local = vec![usize::MAX; cell.num_vertices()];
            for (v, p) in cell.vertices.iter().enumerate() {
                let q = [(p[0] + tx as f64) / nf, (p[1] + ty as f64) / nf];
                if is_face[v] {
                    let key = (q[0].to_bits(), q[1].to_bits());
                    let idx = *by_key.entry(key).or_insert_with(|| {
                        vertices.push(q);
                        vertices.len() - 1
                    });
                    local[v] = idx;
                } else {
                    vertices.push(q);
                    local[v] = vertices.len() - 1;
                }
            }

            for (t, tri) in cell.triangles.iter().enumerate() {
                triangles.push([local[tri[0]], local[tri[1]], local[tri[2]]]);
                source_triangle.push(t);
            }
            if let Ok(edges) = cell.edges(EdgeTag::Sigma) {
                for &[a, b] in edges {
                    sigma.push([local[a], local[b]]);
                }
            }
            for tag in face_tags {
                let outer = match tag {
                    EdgeTag::CellFaceLeft => tx == 0,
                    EdgeTag::CellFaceRight => tx == n - 1,
                    EdgeTag::CellFaceBottom => ty == 0,
                    EdgeTag::CellFaceTop => ty == n - 1,
                    _ => unreachable!(),
                };
                if outer {
                    if let Ok(edges) = cell.edges(tag) {
                        for &[a, b] in edges {
                            gamma.push([local[a], local[b]]);
                        }
                    }
                }
            }
        }
    }

    // Every interior face edge must now be shared by exactly two triangles.
    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    for tri in &triangles {
        for k in 0..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let boundary_edges = counts.values().filter(|&&c| c == 1).count();
    if boundary_edges != gamma.len() + sigma.len() {
        return Err(Error::StitchFailure(format!(
            "{} boundary edges after stitching, expected {} gamma + {} sigma",
            boundary_edges,
            gamma.len(),
            sigma.len()
        )));
    }

    let mut groups: BTreeMap<EdgeTag, Vec<[usize; 2]>> = BTreeMap::new();
    if !sigma.is_empty() {
        groups.insert(EdgeTag::Sigma, sigma);
    }
    groups.insert(EdgeTag::Gamma, gamma);

    let mut mesh = TriMesh::new_unhashed();
    mesh.vertices = vertices;
    mesh.triangles = triangles;
    mesh.edge_groups = groups;
    mesh.h_max = cell.h_max / nf;
    mesh.cell_geometry = cell.cell_geometry;
    mesh.tiling = Some(TileInfo { n, source_triangle });
    mesh.assign_id();
    Ok(mesh)
}
