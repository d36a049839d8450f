//! Unit-cell and perforated-domain triangulations.
//!
//! The cell mesh discretizes Y_s = Y \ cl(H) for a circular hole H centered
//! inside the unit square; tiling stitches N x N scaled copies into the
//! perforated macro domain. Face nodes sit at exact dyadic coordinates so
//! tiles merge by exact coordinate key, and every hole-boundary vertex lies
//! exactly on the circle.

mod build;
mod io;
mod locate;
mod quality;
mod tile;

pub use build::build_cell_mesh;
pub use io::{parse_mesh_text, write_fefunction_csv, write_mesh_text, write_vtk};
pub use locate::GridLocator;
pub use quality::{mesh_quality_report, QualityReport};
pub use tile::tile_perforated_mesh;

use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary edge group tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeTag {
    /// Hole boundary (cell mesh: one circle; tiled mesh: all hole boundaries).
    Sigma,
    /// Outer Dirichlet boundary of the macro domain.
    Gamma,
    CellFaceLeft,
    CellFaceRight,
    CellFaceBottom,
    CellFaceTop,
}

impl EdgeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeTag::Sigma => "SIGMA",
            EdgeTag::Gamma => "GAMMA",
            EdgeTag::CellFaceLeft => "CELL_FACE_L",
            EdgeTag::CellFaceRight => "CELL_FACE_R",
            EdgeTag::CellFaceBottom => "CELL_FACE_B",
            EdgeTag::CellFaceTop => "CELL_FACE_T",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "SIGMA" => EdgeTag::Sigma,
            "GAMMA" => EdgeTag::Gamma,
            "CELL_FACE_L" => EdgeTag::CellFaceLeft,
            "CELL_FACE_R" => EdgeTag::CellFaceRight,
            "CELL_FACE_B" => EdgeTag::CellFaceBottom,
            "CELL_FACE_T" => EdgeTag::CellFaceTop,
            _ => return None,
        })
    }
}

/// Geometry of the reference cell: unit square with one circular hole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    /// Hole center in (0,1)^2.
    pub hole_center: [f64; 2],
    /// Hole radius; 0 means no hole.
    pub hole_radius: f64,
    /// Structured refinement level L, grid step h = 2^-L.
    pub refinement: u32,
}

impl Default for CellGeometry {
    fn default() -> Self {
        CellGeometry {
            hole_center: [0.5, 0.5],
            hole_radius: 0.25,
            refinement: 4,
        }
    }
}

impl CellGeometry {
    pub fn grid_step(&self) -> f64 {
        1.0 / (1u64 << self.refinement) as f64
    }

    /// Check the invariants: L >= 2, r in [0, 0.4], and for r > 0 the closed
    /// disk strictly inside Y with margin >= 2h.
    pub fn validate(&self) -> Result<()> {
        if self.refinement < 2 {
            return Err(Error::InvalidGeometry(format!(
                "refinement {} < 2",
                self.refinement
            )));
        }
        if self.refinement > 12 {
            return Err(Error::InvalidGeometry(format!(
                "refinement {} too large",
                self.refinement
            )));
        }
        if !(0.0..=0.4).contains(&self.hole_radius) {
            return Err(Error::InvalidGeometry(format!(
                "hole radius {} outside [0, 0.4]",
                self.hole_radius
            )));
        }
        if self.hole_radius > 0.0 {
            let h = self.grid_step();
            let m = self.hole_radius + 2.0 * h;
            for d in 0..2 {
                let c = self.hole_center[d];
                if !(c - m > 0.0 && c + m < 1.0) {
                    return Err(Error::InvalidGeometry(format!(
                        "hole margin violated along axis {}: center {} radius {} step {}",
                        d, c, self.hole_radius, h
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Tiling provenance of a perforated macro mesh.
#[derive(Debug, Clone)]
pub struct TileInfo {
    /// Number of cells per direction; epsilon = 1/n.
    pub n: usize,
    /// For each macro triangle, the index of the cell triangle it scales.
    pub source_triangle: Vec<usize>,
}

/// Conforming triangulation with tagged boundary edges and periodic pairing.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex index triples.
    pub triangles: Vec<[usize; 3]>,
    pub edge_groups: BTreeMap<EdgeTag, Vec<[usize; 2]>>,
    /// (master, slave) node pairs; slave - master is exactly (1,0) or (0,1).
    pub periodic_pairs: Vec<(usize, usize)>,
    pub h_max: f64,
    /// Geometry of the underlying cell, if built from one.
    pub cell_geometry: Option<CellGeometry>,
    /// Tiling provenance, if produced by `tile_perforated_mesh`.
    pub tiling: Option<TileInfo>,
    id: u64,
}

impl TriMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Content hash identifying this mesh; stable within a process run.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn edges(&self, tag: EdgeTag) -> Result<&[[usize; 2]]> {
        self.edge_groups
            .get(&tag)
            .map(|v| v.as_slice())
            .ok_or(Error::MissingTag(tag))
    }

    pub fn has_tag(&self, tag: EdgeTag) -> bool {
        self.edge_groups.get(&tag).map_or(false, |v| !v.is_empty())
    }

    pub fn triangle_points(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Twice the signed area of triangle `t`.
    pub fn double_area(&self, t: usize) -> f64 {
        let p = self.triangle_points(t);
        double_area(&p)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| 0.5 * self.double_area(t))
            .sum()
    }

    /// Total length of the edges in a tag group.
    pub fn group_length(&self, tag: EdgeTag) -> Result<f64> {
        Ok(self
            .edges(tag)?
            .iter()
            .map(|&[a, b]| dist(self.vertices[a], self.vertices[b]))
            .sum())
    }

    /// Gradients of the three P1 basis functions on triangle `t`
    /// together with the triangle area.
    pub fn p1_gradients(&self, t: usize) -> ([[f64; 2]; 3], f64) {
        let p = self.triangle_points(t);
        let d = double_area(&p);
        let grads = [
            [(p[1][1] - p[2][1]) / d, (p[2][0] - p[1][0]) / d],
            [(p[2][1] - p[0][1]) / d, (p[0][0] - p[2][0]) / d],
            [(p[0][1] - p[1][1]) / d, (p[1][0] - p[0][0]) / d],
        ];
        (grads, 0.5 * d)
    }

    pub(crate) fn assign_id(&mut self) {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for v in &self.vertices {
            v[0].to_bits().hash(&mut hasher);
            v[1].to_bits().hash(&mut hasher);
        }
        for t in &self.triangles {
            t.hash(&mut hasher);
        }
        for (tag, edges) in &self.edge_groups {
            tag.as_str().hash(&mut hasher);
            edges.hash(&mut hasher);
        }
        self.id = hasher.finish();
    }

    pub(crate) fn new_unhashed() -> Self {
        TriMesh {
            vertices: Vec::new(),
            triangles: Vec::new(),
            edge_groups: BTreeMap::new(),
            periodic_pairs: Vec::new(),
            h_max: 0.0,
            cell_geometry: None,
            tiling: None,
            id: 0,
        }
    }
}

pub(crate) fn double_area(p: &[[f64; 2]; 3]) -> f64 {
    (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Smallest interior angle of a triangle, in degrees.
pub(crate) fn min_angle_deg(p: &[[f64; 2]; 3]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..3 {
        let a = p[i];
        let b = p[(i + 1) % 3];
        let c = p[(i + 2) % 3];
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        let dot = u[0] * v[0] + u[1] * v[1];
        let cross = u[0] * v[1] - u[1] * v[0];
        let ang = cross.atan2(dot).abs().to_degrees();
        best = best.min(ang);
    }
    best
}
