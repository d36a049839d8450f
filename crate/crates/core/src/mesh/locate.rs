//! Point location by uniform spatial binning.

use super::{double_area, TriMesh};

/// Uniform-grid index over the triangles of a mesh, for O(1) point queries.
pub struct GridLocator {
    nx: usize,
    ny: usize,
    min: [f64; 2],
    inv_step: [f64; 2],
    bins: Vec<Vec<usize>>,
}

impl GridLocator {
    pub fn new(mesh: &TriMesh) -> Self {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for v in &mesh.vertices {
            for d in 0..2 {
                min[d] = min[d].min(v[d]);
                max[d] = max[d].max(v[d]);
            }
        }
        let nt = mesh.num_triangles().max(1);
        let per_axis = ((nt as f64).sqrt() as usize).clamp(1, 512);
        let (nx, ny) = (per_axis, per_axis);
        let ext = [
            (max[0] - min[0]).max(f64::MIN_POSITIVE),
            (max[1] - min[1]).max(f64::MIN_POSITIVE),
        ];
        let inv_step = [nx as f64 / ext[0], ny as f64 / ext[1]];
        let mut bins = vec![Vec::new(); nx * ny];
        for (t, _) in mesh.triangles.iter().enumerate() {
            let p = mesh.triangle_points(t);
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for q in &p {
                for d in 0..2 {
                    lo[d] = lo[d].min(q[d]);
                    hi[d] = hi[d].max(q[d]);
                }
            }
            let ix0 = Self::bin(lo[0], min[0], inv_step[0], nx);
            let ix1 = Self::bin(hi[0], min[0], inv_step[0], nx);
            let iy0 = Self::bin(lo[1], min[1], inv_step[1], ny);
            let iy1 = Self::bin(hi[1], min[1], inv_step[1], ny);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    bins[iy * nx + ix].push(t);
                }
            }
        }
        GridLocator {
            nx,
            ny,
            min,
            inv_step,
            bins,
        }
    }

    fn bin(x: f64, min: f64, inv: f64, n: usize) -> usize {
        (((x - min) * inv).floor() as isize).clamp(0, n as isize - 1) as usize
    }

    /// Find a triangle containing `p` and its barycentric coordinates.
    /// Accepts points within a small tolerance of element boundaries.
    pub fn locate(&self, mesh: &TriMesh, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let ix = Self::bin(p[0], self.min[0], self.inv_step[0], self.nx);
        let iy = Self::bin(p[1], self.min[1], self.inv_step[1], self.ny);
        // Search the home bin first, then its ring of neighbors.
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for (dy, dx) in [
            (0isize, 0isize),
            (0, 1),
            (0, -1),
            (1, 0),
            (-1, 0),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ] {
            let jx = ix as isize + dx;
            let jy = iy as isize + dy;
            if jx < 0 || jy < 0 || jx >= self.nx as isize || jy >= self.ny as isize {
                continue;
            }
            for &t in &self.bins[jy as usize * self.nx + jx as usize] {
                let tri = mesh.triangle_points(t);
                let d = double_area(&tri);
                let l0 = ((tri[1][0] - p[0]) * (tri[2][1] - p[1])
                    - (tri[2][0] - p[0]) * (tri[1][1] - p[1]))
                    / d;
                let l1 = ((tri[2][0] - p[0]) * (tri[0][1] - p[1])
                    - (tri[0][0] - p[0]) * (tri[2][1] - p[1]))
                    / d;
                let l2 = 1.0 - l0 - l1;
                let worst = l0.min(l1).min(l2);
                if worst >= 0.0 {
                    return Some((t, [l0, l1, l2]));
                }
                if best.map_or(true, |(_, _, w)| worst > w) {
                    best = Some((t, [l0, l1, l2], worst));
                }
            }
        }
        // Tolerate tiny excursions outside the nearest triangle (points on
        // shared edges, rounding in x/eps maps).
        match best {
            Some((t, b, w)) if w > -1e-9 => Some((t, b)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cell_mesh, CellGeometry};

    #[test]
    fn locates_interior_and_boundary_points() {
        let mesh = build_cell_mesh(&CellGeometry::default()).unwrap();
        let loc = GridLocator::new(&mesh);
        for p in [[0.03, 0.97], [0.5, 0.03], [0.0, 0.0], [1.0, 1.0], [0.13, 0.5]] {
            let (t, b) = loc.locate(&mesh, p).expect("point should be found");
            let tri = mesh.triangle_points(t);
            for d in 0..2 {
                let x = b[0] * tri[0][d] + b[1] * tri[1][d] + b[2] * tri[2][d];
                assert!((x - p[d]).abs() < 1e-12);
            }
        }
        // Hole center is not in the mesh.
        assert!(loc.locate(&mesh, [0.5, 0.5]).is_none());
    }
}
