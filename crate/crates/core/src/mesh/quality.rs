//! Mesh quality metrics.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{min_angle_deg, TriMesh};

#[derive(Debug, Clone, Serialize)]
pub struct QualityReport {
    pub min_angle_deg: f64,
    pub h_max: f64,
    pub area_sum: f64,
    /// V - E + F over the triangulated surface (1 for a disk, 0 per hole).
    pub euler_characteristic: i64,
    pub num_vertices: usize,
    pub num_triangles: usize,
    pub num_edges: usize,
}

pub fn mesh_quality_report(mesh: &TriMesh) -> QualityReport {
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut min_angle = f64::INFINITY;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            edges.insert((a.min(b), a.max(b)));
        }
        min_angle = min_angle.min(min_angle_deg(&mesh.triangle_points(t)));
    }
    let v = mesh.num_vertices() as i64;
    let e = edges.len() as i64;
    let f = mesh.num_triangles() as i64;
    QualityReport {
        min_angle_deg: min_angle,
        h_max: mesh.h_max,
        area_sum: mesh.area(),
        euler_characteristic: v - e + f,
        num_vertices: mesh.num_vertices(),
        num_triangles: mesh.num_triangles(),
        num_edges: edges.len(),
    }
}
